#pragma once

#include "auf/scm.hpp"

namespace auf {

// Number of true edges (i, j) placed backwards by the order
// (position of i after position of j).
size_t div_metric(const Order& order, const Dag& g_true);

// Number of node pairs whose edge status differs; a reversed edge counts
// as one disagreement.
size_t shd(const Dag& g_est, const Dag& g_true);

// Number of ordered pairs (i, j) for which the estimated parent set of i
// fails to identify the effect of i on j in the true graph: an estimated
// parent j counts iff it is truly a descendant of i; otherwise the parent
// set must pass the complete adjustment criterion, checked by d-separation
// in the proper back-door graph.
size_t sid(const Dag& g_est, const Dag& g_true);

// d-separation of a and b given z, by reachability over active paths.
bool d_separated(const Dag& g, size_t a, size_t b,
                 const std::vector<size_t>& z);

}  // namespace auf
