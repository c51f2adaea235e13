#pragma once

#include "tea/checkpoint.hpp"
#include "tea/config.hpp"
#include "tea/consensus.hpp"
#include "tea/contrastive.hpp"
#include "tea/encoder.hpp"
#include "tea/error.hpp"
#include "tea/features.hpp"
#include "tea/fusion.hpp"
#include "tea/io.hpp"
#include "tea/metrics.hpp"
#include "tea/mlp.hpp"
#include "tea/model.hpp"
#include "tea/numeric.hpp"
#include "tea/optim.hpp"
#include "tea/pipeline.hpp"
#include "tea/rng.hpp"
#include "tea/seeds.hpp"
#include "tea/synthetic.hpp"
#include "tea/theorems.hpp"
#include "tea/tkg.hpp"
#include "tea/trainer.hpp"
