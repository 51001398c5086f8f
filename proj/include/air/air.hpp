#pragma once

#include "air/data_io.hpp"
#include "air/dataset.hpp"
#include "air/error.hpp"
#include "air/group_operator.hpp"
#include "air/loss.hpp"
#include "air/matrix.hpp"
#include "air/metrics.hpp"
#include "air/model_io.hpp"
#include "air/noise.hpp"
#include "air/parallel.hpp"
#include "air/random.hpp"
#include "air/regularizer.hpp"
#include "air/sadmm.hpp"
#include "air/sgd.hpp"
