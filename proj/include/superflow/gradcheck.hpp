#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace superflow {

/// Result of finite-difference validation for one differentiable op. The
/// relative error is max|analytic - numeric| scaled by the largest numeric
/// component (floored at 1e-8), maximized over all instances.
struct GradCheckReport {
    std::string name;
    double max_rel_err = 0.0;
    int instances = 0;
    bool pass = false;
};

/// Central-difference checks (h = 1e-6, tolerance 1e-5) over randomized
/// instances of every op that carries gradients: the three losses, the
/// projection heads, the point encoder, and superpoint pooling.
std::vector<GradCheckReport> run_gradcheck(std::uint64_t seed);

}  // namespace superflow
