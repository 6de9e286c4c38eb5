// SPDX-License-Identifier: Apache-2.0
//
// Everything: tensors and autodiff, text pipeline, coherence graphs, the
// model, training, decoding and metrics.
#pragma once

#include "corpg/coherence.hpp"
#include "corpg/corpus_io.hpp"
#include "corpg/decoding.hpp"
#include "corpg/diversity.hpp"
#include "corpg/grad_suite.hpp"
#include "corpg/metrics.hpp"
#include "corpg/model/checkpoint.hpp"
#include "corpg/pseudo_corpus.hpp"
#include "corpg/trainer.hpp"
