#pragma once

#include "asymptotics.hpp"
#include "coefficients.hpp"
#include "errors.hpp"
#include "evolve.hpp"
#include "grid.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "operators.hpp"
#include "spectral.hpp"
#include "steady.hpp"
