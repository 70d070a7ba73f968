#pragma once

// Umbrella header: equilibrium chains, normal modes, segmented-pulse gates
// and the thermal error budget.

#include "iongate/constants.hpp"
#include "iongate/errors.hpp"
#include "iongate/physcore.hpp"
#include "iongate/chain.hpp"
#include "iongate/modes.hpp"
#include "iongate/kernels.hpp"
#include "iongate/gate.hpp"
#include "iongate/errbudget.hpp"
#include "iongate/config.hpp"
