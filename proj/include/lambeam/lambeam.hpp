#pragma once

// Numerical toolkit for a three-field laminated beam with dynamic boundary
// conditions: energy-exact finite-element assembly, the conservative group
// and its damped variant, boundary observability diagnostics, and the
// Gramian-based construction of the three null controls.

#include "lambeam/assembly.hpp"
#include "lambeam/config.hpp"
#include "lambeam/errors.hpp"
#include "lambeam/evolution.hpp"
#include "lambeam/hum.hpp"
#include "lambeam/io.hpp"
#include "lambeam/modal.hpp"
#include "lambeam/observability.hpp"
#include "lambeam/params.hpp"
#include "lambeam/rng.hpp"
#include "lambeam/runner.hpp"
