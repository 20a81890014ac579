#pragma once

#include "d2s/data_filter.hpp"
#include "d2s/dense_ir.hpp"
#include "d2s/doc_model.hpp"
#include "d2s/embedder.hpp"
#include "d2s/error.hpp"
#include "d2s/eval_harness.hpp"
#include "d2s/figure_select.hpp"
#include "d2s/generation.hpp"
#include "d2s/keyword_tree.hpp"
#include "d2s/textkit.hpp"
