#pragma once

#include "home/config.hpp"
#include "home/data.hpp"
#include "home/diagnostics.hpp"
#include "home/embedding.hpp"
#include "home/error.hpp"
#include "home/loss.hpp"
#include "home/matrix.hpp"
#include "home/model.hpp"
#include "home/moments.hpp"
#include "home/optim.hpp"
#include "home/parallel.hpp"
#include "home/rng.hpp"
#include "home/summation.hpp"
#include "home/trainer.hpp"
#include "home/variants.hpp"
#include "home/version.hpp"
