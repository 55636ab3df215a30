#pragma once

// Choosing the number of clusters for k-means via effective degrees of
// freedom, with a battery of reference selectors and simulation tooling.

#include "kselect/csv.hpp"
#include "kselect/edf.hpp"
#include "kselect/errors.hpp"
#include "kselect/evaluate.hpp"
#include "kselect/kmeans.hpp"
#include "kselect/matrix.hpp"
#include "kselect/parallel.hpp"
#include "kselect/rng.hpp"
#include "kselect/selection.hpp"
#include "kselect/simulate.hpp"
#include "kselect/smooth.hpp"
