#pragma once

// Nonlinear silicon waveguide characterisation: pulse propagation with Kerr,
// two-photon-absorption and free-carrier effects, temperature-dependent
// material models, Gerchberg-Saxton phase retrieval, and the fitting
// machinery that recovers nonlinear coefficients from transmission and
// spectral data.

#include "nlwg/config.hpp"
#include "nlwg/constants.hpp"
#include "nlwg/errors.hpp"
#include "nlwg/fft.hpp"
#include "nlwg/fitting.hpp"
#include "nlwg/grid.hpp"
#include "nlwg/io.hpp"
#include "nlwg/materials.hpp"
#include "nlwg/optimize.hpp"
#include "nlwg/phase_retrieval.hpp"
#include "nlwg/pipeline.hpp"
#include "nlwg/propagation.hpp"
#include "nlwg/pulse.hpp"
#include "nlwg/waveguide.hpp"
