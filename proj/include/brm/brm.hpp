#pragma once

#include "brm/asymptotics.hpp"
#include "brm/bounds.hpp"
#include "brm/config.hpp"
#include "brm/cov_model.hpp"
#include "brm/gauss.hpp"
#include "brm/json_io.hpp"
#include "brm/qp.hpp"
#include "brm/risk_spec.hpp"
#include "brm/simulator.hpp"
