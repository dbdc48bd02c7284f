#pragma once

#include "npga/autoencoder.hpp"
#include "npga/checkpoint.hpp"
#include "npga/common.hpp"
#include "npga/config.hpp"
#include "npga/data.hpp"
#include "npga/eval.hpp"
#include "npga/guidance.hpp"
#include "npga/kernels.hpp"
#include "npga/objective.hpp"
#include "npga/optimizer.hpp"
#include "npga/trainer.hpp"
