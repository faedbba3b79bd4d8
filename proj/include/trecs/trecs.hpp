#pragma once

#include "assignment.hpp"
#include "cp_model.hpp"
#include "decomposition.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "matrix_recovery.hpp"
#include "measurement.hpp"
#include "pipeline.hpp"
#include "random.hpp"
#include "tensor.hpp"
