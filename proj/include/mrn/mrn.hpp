#pragma once

// Umbrella header for the mrn library: Solidity frontend, multi-relational
// graph construction, the numeric kernel, the MRN-GCN model, and the
// training/evaluation harness.

#include "mrn/ast.hpp"
#include "mrn/ast_json.hpp"
#include "mrn/checkpoint.hpp"
#include "mrn/dataset.hpp"
#include "mrn/errors.hpp"
#include "mrn/graph.hpp"
#include "mrn/graph_build.hpp"
#include "mrn/graph_json.hpp"
#include "mrn/lexer.hpp"
#include "mrn/metrics.hpp"
#include "mrn/model.hpp"
#include "mrn/ops.hpp"
#include "mrn/parser.hpp"
#include "mrn/rng.hpp"
#include "mrn/sgd.hpp"
#include "mrn/tape.hpp"
#include "mrn/tensor.hpp"
#include "mrn/train.hpp"
#include "mrn/vocab.hpp"
