#pragma once

#include "bssp/balancing.hpp"
#include "bssp/datagen.hpp"
#include "bssp/design.hpp"
#include "bssp/error.hpp"
#include "bssp/evaluation.hpp"
#include "bssp/gwlp.hpp"
#include "bssp/matrix.hpp"
#include "bssp/models.hpp"
#include "bssp/rng.hpp"
#include "bssp/subsampling.hpp"
#include "bssp/version.hpp"
