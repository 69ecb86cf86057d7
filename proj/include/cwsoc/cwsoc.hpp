#pragma once

#include "cwsoc/cramer.hpp"
#include "cwsoc/errors.hpp"
#include "cwsoc/expr.hpp"
#include "cwsoc/interaction.hpp"
#include "cwsoc/io.hpp"
#include "cwsoc/kernel.hpp"
#include "cwsoc/limitlaw.hpp"
#include "cwsoc/measure.hpp"
#include "cwsoc/model.hpp"
#include "cwsoc/parallel.hpp"
#include "cwsoc/quadrature.hpp"
#include "cwsoc/rng.hpp"
#include "cwsoc/stats.hpp"
#include "cwsoc/transforms.hpp"
