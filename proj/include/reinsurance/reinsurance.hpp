#pragma once

#include "reinsurance/clearing.hpp"
#include "reinsurance/diagnostics.hpp"
#include "reinsurance/harness.hpp"
#include "reinsurance/liability.hpp"
#include "reinsurance/line_graph.hpp"
#include "reinsurance/linear_solve.hpp"
#include "reinsurance/network.hpp"
#include "reinsurance/rng.hpp"
#include "reinsurance/solve.hpp"
#include "reinsurance/spectral.hpp"
#include "reinsurance/synthesis.hpp"
