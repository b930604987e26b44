#pragma once

#include "anova_rff/errors.hpp"
#include "anova_rff/index_sets.hpp"
#include "anova_rff/rng.hpp"
#include "anova_rff/sampling.hpp"
#include "anova_rff/features.hpp"
#include "anova_rff/solvers.hpp"
#include "anova_rff/sensitivity.hpp"
#include "anova_rff/boosting.hpp"
#include "anova_rff/sparse_fit.hpp"
#include "anova_rff/oracle.hpp"
#include "anova_rff/io.hpp"
#include "anova_rff/experiment.hpp"
