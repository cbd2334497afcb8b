#pragma once

#include "ipa/aggregate.hpp"
#include "ipa/checkpoint.hpp"
#include "ipa/collapse.hpp"
#include "ipa/config.hpp"
#include "ipa/data.hpp"
#include "ipa/errors.hpp"
#include "ipa/experiment.hpp"
#include "ipa/interaction.hpp"
#include "ipa/layers.hpp"
#include "ipa/linalg.hpp"
#include "ipa/metrics.hpp"
#include "ipa/model.hpp"
#include "ipa/optim.hpp"
#include "ipa/rng.hpp"
#include "ipa/train.hpp"
