#pragma once

#include "stfuse/bspline.hpp"
#include "stfuse/config.hpp"
#include "stfuse/core.hpp"
#include "stfuse/covariance.hpp"
#include "stfuse/dependence.hpp"
#include "stfuse/hotlogit.hpp"
#include "stfuse/ingest.hpp"
#include "stfuse/lowrank_em.hpp"
#include "stfuse/normal.hpp"
#include "stfuse/optim.hpp"
#include "stfuse/params.hpp"
#include "stfuse/sblue.hpp"
#include "stfuse/simbench.hpp"
#include "stfuse/simulate.hpp"
