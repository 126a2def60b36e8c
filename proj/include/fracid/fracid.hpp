#pragma once

#include "fracid/version.hpp"
#include "fracid/errors.hpp"
#include "fracid/warnings.hpp"
#include "fracid/spectrum.hpp"
#include "fracid/noise.hpp"
#include "fracid/state.hpp"
#include "fracid/sensitivity.hpp"
#include "fracid/objective.hpp"
#include "fracid/optimizer.hpp"
#include "fracid/montecarlo.hpp"
#include "fracid/diagnostics.hpp"
#include "fracid/io.hpp"
#include "fracid/config.hpp"
