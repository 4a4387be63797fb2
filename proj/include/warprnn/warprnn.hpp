#pragma once

// Umbrella header for the recurrent-network time-warping laboratory.

#include "warprnn/cells.hpp"
#include "warprnn/common.hpp"
#include "warprnn/csv.hpp"
#include "warprnn/init.hpp"
#include "warprnn/numerics.hpp"
#include "warprnn/optim.hpp"
#include "warprnn/params.hpp"
#include "warprnn/rng.hpp"
#include "warprnn/tasks.hpp"
#include "warprnn/train.hpp"
