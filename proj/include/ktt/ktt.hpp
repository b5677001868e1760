#pragma once

#include "ktt/errors.hpp"
#include "ktt/tt_tensor.hpp"
#include "ktt/svd.hpp"
#include "ktt/tt_io.hpp"
#include "ktt/dictionary.hpp"
#include "ktt/dynamics.hpp"
#include "ktt/dense_pipeline.hpp"
#include "ktt/amuset.hpp"
#include "ktt/generator_tt.hpp"
#include "ktt/generator_io.hpp"
#include "ktt/harness.hpp"
