#pragma once

#include "srca/backends/backend.hpp"
#include "srca/backends/http.hpp"
#include "srca/backends/scripted_world.hpp"
#include "srca/core/answer.hpp"
#include "srca/core/config.hpp"
#include "srca/core/ops.hpp"
#include "srca/core/types.hpp"
#include "srca/decision.hpp"
#include "srca/error.hpp"
#include "srca/serialize.hpp"
#include "srca/strategies/acs.hpp"
#include "srca/strategies/engine.hpp"
