#pragma once

#include <cstddef>

#include "squeezelab/distributions.hpp"

namespace squeezelab {

/// Detected joint distribution of the full model, i.e.
/// apply_loss(compose_state(params), eta_s, eta_i), on the window
/// dim_s x dim_i. Loss commutes with the convolution of independent
/// components, so each Schmidt mode and each background is attenuated on its
/// own and no pre-loss truncation is involved: every entry in the window is
/// exact up to rounding and the truncated mass is what lies outside it.
JointDist model_output(const ModelParams& params, std::size_t dim_s, std::size_t dim_i);

/// Joint distribution of one lossy single-mode TMSV with lambda^2 = x, from
/// its generating function (1 - x) / (1 - x (1 - es + es u) (1 - ei + ei v)).
JointDist lossy_tmsv(double x, double eta_s, double eta_i, std::size_t dim_s, std::size_t dim_i);

}  // namespace squeezelab
