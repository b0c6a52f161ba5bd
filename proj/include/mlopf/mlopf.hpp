#pragma once

#include "mlopf/audit.hpp"
#include "mlopf/coupling.hpp"
#include "mlopf/error.hpp"
#include "mlopf/feedergen.hpp"
#include "mlopf/network.hpp"
#include "mlopf/opf.hpp"
#include "mlopf/partition.hpp"
#include "mlopf/path_oracle.hpp"
#include "mlopf/phase.hpp"
#include "mlopf/powerflow.hpp"
#include "mlopf/sensitivity.hpp"
#include "mlopf/solver.hpp"
