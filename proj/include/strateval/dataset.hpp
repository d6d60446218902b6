/**
 * Scored test sets: CSV ingestion and the stratification variable.
 *
 * A ScoredDataset holds what a deployed classifier emits for every test
 * instance (score and predicted label). Simulation files additionally carry the
 * true label; that column is sealed inside the dataset and can only be read
 * through a TruthAccess key, which is constructible only by the label oracle
 * and the CSV writer.
 *
 * CSV contract: UTF-8, comma separated, header exactly `id,score,predicted,truth`
 * (simulation file) or `id,score,predicted` (deployment file). Row order defines
 * the instance index used everywhere else.
 */
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <utility>
#include <vector>

namespace strateval {

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScoreKind { probabilistic, margin };

inline std::string_view to_string(ScoreKind kind) {
    return kind == ScoreKind::probabilistic ? "probabilistic" : "margin";
}

inline ScoreKind parse_score_kind(std::string_view token) {
    if (token == "probabilistic" || token == "prob") return ScoreKind::probabilistic;
    if (token == "margin") return ScoreKind::margin;
    throw std::invalid_argument("unknown score kind '" + std::string(token) + "'");
}

struct InstanceRecord {
    std::int64_t id = 0;
    /// Probability of the positive class (binary), of the predicted class
    /// (multiclass), or a signed margin.
    double raw_score = 0.0;
    int predicted_label = 0;

    bool operator==(const InstanceRecord&) const = default;
};

class LabelTable;
class ScoredCsvWriter;

/// Key type gating read access to true labels.
class TruthAccess {
    TruthAccess() = default;
    friend class LabelTable;
    friend class ScoredCsvWriter;
};

class ScoredDataset {
public:
    ScoredDataset(std::vector<InstanceRecord> records, ScoreKind kind,
                  std::optional<std::vector<int>> truth = std::nullopt)
        : records_(std::move(records)), kind_(kind), truth_(std::move(truth)) {
        if (records_.empty()) throw DataError("empty dataset");
        if (truth_ && truth_->size() != records_.size())
            throw DataError("truth column length does not match record count");
        std::unordered_set<std::int64_t> seen;
        seen.reserve(records_.size());
        for (std::size_t i = 0; i < records_.size(); ++i) {
            const auto& r = records_[i];
            if (!std::isfinite(r.raw_score))
                throw DataError("record " + std::to_string(i + 1) + ": non-finite score");
            if (kind_ == ScoreKind::probabilistic && (r.raw_score < 0.0 || r.raw_score > 1.0))
                throw DataError("record " + std::to_string(i + 1) +
                                ": probabilistic score outside [0,1]");
            if (!seen.insert(r.id).second)
                throw DataError("record " + std::to_string(i + 1) + ": duplicate id " +
                                std::to_string(r.id));
        }
    }

    std::size_t size() const noexcept { return records_.size(); }
    const std::vector<InstanceRecord>& records() const noexcept { return records_; }
    const InstanceRecord& operator[](std::size_t i) const { return records_[i]; }
    ScoreKind kind() const noexcept { return kind_; }
    bool has_truth() const noexcept { return truth_.has_value(); }

    const std::vector<int>& truth(TruthAccess) const {
        if (!truth_) throw DataError("dataset has no truth column");
        return *truth_;
    }

    /// Copy without the truth column, as handed to label-free components.
    ScoredDataset without_truth() const { return ScoredDataset(records_, kind_); }

    bool operator==(const ScoredDataset&) const = default;

private:
    std::vector<InstanceRecord> records_;
    ScoreKind kind_;
    std::optional<std::vector<int>> truth_;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return value;
}

/// Shortest decimal form that round-trips.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace detail

/// Parse a scored CSV from a stream. `source` names the input in messages.
inline ScoredDataset parse_scored_csv(std::istream& in, ScoreKind kind,
                                      const std::string& source = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty dataset");
    const std::string_view header = detail::trim(line);
    bool with_truth;
    if (header == "id,score,predicted,truth")
        with_truth = true;
    else if (header == "id,score,predicted")
        with_truth = false;
    else
        throw DataError(source + ": header must be 'id,score,predicted,truth' or "
                                 "'id,score,predicted', got '" +
                        std::string(header) + "'");
    const std::size_t columns = with_truth ? 4 : 3;

    std::vector<InstanceRecord> records;
    std::vector<int> truth;
    std::unordered_set<std::int64_t> ids;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const std::string_view text = detail::trim(line);
        if (text.empty()) continue;
        const auto where = [&] { return source + ": row " + std::to_string(row) + ": "; };
        const auto fields = detail::split_commas(text);
        if (fields.size() != columns)
            throw DataError(where() + "expected " + std::to_string(columns) + " columns, got " +
                            std::to_string(fields.size()));
        const auto id = detail::parse_number<std::int64_t>(fields[0]);
        if (!id) throw DataError(where() + "non-integer id '" + std::string(fields[0]) + "'");
        const auto score = detail::parse_number<double>(fields[1]);
        if (!score || !std::isfinite(*score))
            throw DataError(where() + "non-numeric score '" + std::string(fields[1]) + "'");
        if (kind == ScoreKind::probabilistic && (*score < 0.0 || *score > 1.0))
            throw DataError(where() + "probabilistic score " + std::string(fields[1]) +
                            " outside [0,1]");
        const auto predicted = detail::parse_number<int>(fields[2]);
        if (!predicted)
            throw DataError(where() + "non-integer predicted label '" + std::string(fields[2]) +
                            "'");
        if (!ids.insert(*id).second)
            throw DataError(where() + "duplicate id " + std::to_string(*id));
        if (with_truth) {
            const auto t = detail::parse_number<int>(fields[3]);
            if (!t)
                throw DataError(where() + "non-integer truth label '" + std::string(fields[3]) +
                                "'");
            truth.push_back(*t);
        }
        records.push_back({*id, *score, *predicted});
    }
    if (records.empty()) throw DataError(source + ": empty dataset");
    if (with_truth) return ScoredDataset(std::move(records), kind, std::move(truth));
    return ScoredDataset(std::move(records), kind);
}

inline ScoredDataset load_scored_csv(const std::string& path, ScoreKind kind) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return parse_scored_csv(in, kind, path);
}

/// Writes datasets back out in the CSV contract, including truth when present.
class ScoredCsvWriter {
public:
    static void write(std::ostream& out, const ScoredDataset& data) {
        const bool with_truth = data.has_truth();
        out << (with_truth ? "id,score,predicted,truth\n" : "id,score,predicted\n");
        const std::vector<int>* truth = with_truth ? &data.truth(TruthAccess{}) : nullptr;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& r = data[i];
            out << r.id << ',' << detail::format_double(r.raw_score) << ',' << r.predicted_label;
            if (truth) out << ',' << (*truth)[i];
            out << '\n';
        }
    }
};

inline void write_scored_csv(std::ostream& out, const ScoredDataset& data) {
    ScoredCsvWriter::write(out, data);
}

inline void write_scored_csv(const std::string& path, const ScoredDataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_scored_csv(out, data);
}

/**
 * Stratification variable z, aligned with dataset rows.
 *
 * Margin scores give z = |score|. Probabilistic scores give the probability of
 * the predicted class: when every predicted label lies in {0,1} or in {-1,+1}
 * the score is read as p(positive) and converted with z = max(p, 1 - p), which
 * is the predicted-class probability for a thresholded binary classifier; for
 * any other label set the score must already be the predicted-class
 * probability and is used as is.
 */
struct StratVariable {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

inline StratVariable derive_z(const ScoredDataset& data) {
    StratVariable z;
    z.values.reserve(data.size());
    if (data.kind() == ScoreKind::margin) {
        for (const auto& r : data.records()) z.values.push_back(std::abs(r.raw_score));
        return z;
    }
    const auto& recs = data.records();
    const bool zero_one = std::all_of(recs.begin(), recs.end(), [](const InstanceRecord& r) {
        return r.predicted_label == 0 || r.predicted_label == 1;
    });
    const bool plus_minus = std::all_of(recs.begin(), recs.end(), [](const InstanceRecord& r) {
        return r.predicted_label == -1 || r.predicted_label == 1;
    });
    for (const auto& r : recs) {
        if (zero_one || plus_minus)
            z.values.push_back(std::max(r.raw_score, 1.0 - r.raw_score));
        else
            z.values.push_back(r.raw_score);
    }
    return z;
}

}  // namespace strateval
