/**
 * The label oracle: the only component that reads true labels.
 *
 * A LabelTable is built once from a simulation dataset and holds the sealed
 * correctness bits a_i (1 when the prediction matches the truth). A
 * BudgetedOracle wraps a shared table with a per-replicate budget and answers
 * queries with correctness bits, never raw labels. Queries are atomic: a query
 * that would exceed the budget, or names an unknown instance, changes nothing.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dataset.hpp"

namespace strateval {

struct CorrectnessBit {
    std::int64_t id = 0;
    int a = 0;

    bool operator==(const CorrectnessBit&) const = default;
};

class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(std::int64_t requested, std::int64_t remaining)
        : std::runtime_error("label budget exceeded: requested " + std::to_string(requested) +
                             ", remaining " + std::to_string(remaining)),
          remaining_(remaining) {}

    std::int64_t remaining() const noexcept { return remaining_; }

private:
    std::int64_t remaining_;
};

class LabelTable {
public:
    explicit LabelTable(const ScoredDataset& data) {
        if (!data.has_truth()) throw DataError("dataset lacks a truth column; cannot build an oracle");
        const auto& truth = data.truth(TruthAccess{});
        bits_.reserve(data.size());
        index_.reserve(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            bits_.push_back(data[i].predicted_label == truth[i] ? 1 : 0);
            index_.emplace(data[i].id, i);
        }
    }

    std::size_t size() const noexcept { return bits_.size(); }

    std::size_t index_of(std::int64_t id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw std::out_of_range("unknown instance id " + std::to_string(id));
        return it->second;
    }

    bool contains(std::int64_t id) const { return index_.contains(id); }

    /**
     * Population accuracy over the whole table. Evaluation-only: the harness
     * uses it to score estimates (MAE); estimators never call it.
     */
    double population_accuracy() const {
        std::size_t correct = 0;
        for (int b : bits_) correct += static_cast<std::size_t>(b);
        return static_cast<double>(correct) / static_cast<double>(bits_.size());
    }

private:
    friend class BudgetedOracle;
    std::vector<int> bits_;
    std::unordered_map<std::int64_t, std::size_t> index_;
};

class BudgetedOracle {
public:
    BudgetedOracle(std::shared_ptr<const LabelTable> table, std::int64_t budget)
        : table_(std::move(table)), budget_(budget) {
        if (!table_) throw std::invalid_argument("oracle needs a label table");
        if (budget_ < 0) throw std::invalid_argument("label budget must be nonnegative");
    }

    std::int64_t budget() const noexcept { return budget_; }
    std::int64_t consumed() const noexcept { return consumed_; }
    std::int64_t remaining() const noexcept { return budget_ - consumed_; }
    /// Number of instances the oracle can answer for (N).
    std::size_t population() const noexcept { return table_->size(); }

    /// Label instances by id. Every entry consumes one unit, repeats included.
    std::vector<CorrectnessBit> query(std::span<const std::int64_t> ids) {
        reserve(ids.size());
        std::vector<std::size_t> rows;
        rows.reserve(ids.size());
        for (std::int64_t id : ids) rows.push_back(table_->index_of(id));
        consumed_ += static_cast<std::int64_t>(ids.size());
        std::vector<CorrectnessBit> out;
        out.reserve(ids.size());
        for (std::size_t j = 0; j < ids.size(); ++j) out.push_back({ids[j], table_->bits_[rows[j]]});
        return out;
    }

    /// Label instances by row index.
    std::vector<int> query_rows(std::span<const std::size_t> rows) {
        reserve(rows.size());
        for (std::size_t r : rows)
            if (r >= table_->size()) throw std::out_of_range("row index out of range");
        consumed_ += static_cast<std::int64_t>(rows.size());
        std::vector<int> out;
        out.reserve(rows.size());
        for (std::size_t r : rows) out.push_back(table_->bits_[r]);
        return out;
    }

    int query_row(std::size_t row) {
        const std::size_t one[] = {row};
        return query_rows(one).front();
    }

private:
    void reserve(std::size_t count) const {
        const auto requested = static_cast<std::int64_t>(count);
        if (requested > remaining()) throw BudgetExceeded(requested, remaining());
    }

    std::shared_ptr<const LabelTable> table_;
    std::int64_t budget_;
    std::int64_t consumed_ = 0;
};

inline BudgetedOracle make_oracle(const ScoredDataset& data, std::int64_t budget) {
    if (budget < 0) throw std::invalid_argument("label budget must be nonnegative");
    return BudgetedOracle(std::make_shared<const LabelTable>(data), budget);
}

}  // namespace strateval
