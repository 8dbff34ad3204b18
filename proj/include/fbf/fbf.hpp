#pragma once

#include "fbf/core.hpp"
#include "fbf/linop.hpp"
#include "fbf/prox.hpp"
#include "fbf/system.hpp"
#include "fbf/fbf_solver.hpp"
#include "fbf/minimization.hpp"
#include "fbf/imaging.hpp"
#include "fbf/oracle.hpp"
#include "fbf/demos.hpp"
