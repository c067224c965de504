#pragma once

// Umbrella header for the whole library: tensor/autodiff core, exact
// discrete-information machinery, the contrastive + KL + reconstruction
// objective, synthetic two-view data, training, and evaluation.

#include "superinfo/errors.hpp"
#include "superinfo/rng.hpp"
#include "superinfo/io.hpp"
#include "superinfo/text.hpp"
#include "superinfo/tensor.hpp"
#include "superinfo/autodiff.hpp"
#include "superinfo/gradcheck.hpp"
#include "superinfo/joint.hpp"
#include "superinfo/info.hpp"
#include "superinfo/models.hpp"
#include "superinfo/losses.hpp"
#include "superinfo/synthetic.hpp"
#include "superinfo/container.hpp"
#include "superinfo/augment.hpp"
#include "superinfo/optimizer.hpp"
#include "superinfo/trainer.hpp"
#include "superinfo/probe.hpp"
#include "superinfo/config.hpp"
