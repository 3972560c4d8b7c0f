#pragma once

// Umbrella header for the dpo library.

#include "dpo/backends.hpp"
#include "dpo/bcd.hpp"
#include "dpo/config_io.hpp"
#include "dpo/dpo_model.hpp"
#include "dpo/harness.hpp"
#include "dpo/market_data.hpp"
#include "dpo/model_io.hpp"
#include "dpo/precision.hpp"
#include "dpo/qubo.hpp"
