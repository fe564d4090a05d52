#pragma once

#include <string>
#include <vector>

#include "lsc/grid.hpp"
#include "lsc/model.hpp"

namespace lsc {

/// A built-in problem together with a grid suited to it.
struct Preset {
    ProblemSpec spec;
    GridSpec grid;
};

/// Geometric Brownian motion dZ = mu Z dt + sigma Z dW with f = Psi = max(z, 0)
/// and a single (trivial) control. Conditional means are attached.
ProblemSpec gbm_spec(double mu, double sigma, std::vector<double> dates, std::string name);

/// Names accepted by make_preset: gbm1, gbm2, drift2, affine1.
std::vector<std::string> preset_names();

/// Throws InvalidArgument for an unknown name.
Preset make_preset(const std::string& name);

} // namespace lsc
