// Umbrella header.
#pragma once

#include "allocation.hpp"
#include "dataset.hpp"
#include "density.hpp"
#include "estimation.hpp"
#include "harness.hpp"
#include "oracle.hpp"
#include "random.hpp"
#include "stratification.hpp"
