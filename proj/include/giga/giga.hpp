#pragma once

#include "giga/channel_io.hpp"
#include "giga/detector.hpp"
#include "giga/errors.hpp"
#include "giga/exp_family.hpp"
#include "giga/lmmse.hpp"
#include "giga/m_projection.hpp"
#include "giga/rng.hpp"
#include "giga/sim.hpp"
#include "giga/system_model.hpp"
