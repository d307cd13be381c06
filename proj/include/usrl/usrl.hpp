#pragma once

#include "usrl/adamw.hpp"
#include "usrl/checkpoint.hpp"
#include "usrl/conll.hpp"
#include "usrl/embedder.hpp"
#include "usrl/embedding_cache.hpp"
#include "usrl/errors.hpp"
#include "usrl/eval.hpp"
#include "usrl/gradcheck.hpp"
#include "usrl/lstm.hpp"
#include "usrl/model.hpp"
#include "usrl/nn.hpp"
#include "usrl/random.hpp"
#include "usrl/run_config.hpp"
#include "usrl/serialize.hpp"
#include "usrl/sweep.hpp"
#include "usrl/tensor.hpp"
#include "usrl/trainer.hpp"
