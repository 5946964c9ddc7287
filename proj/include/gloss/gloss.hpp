#pragma once

#include "gloss/data_io.hpp"
#include "gloss/error.hpp"
#include "gloss/eval.hpp"
#include "gloss/graph.hpp"
#include "gloss/prox.hpp"
#include "gloss/scoring.hpp"
#include "gloss/solver.hpp"
#include "gloss/synth.hpp"
#include "gloss/tensor.hpp"
#include "gloss/tensor_io.hpp"
#include "gloss/version.hpp"
