#pragma once

#include "vpiseg/augment.hpp"
#include "vpiseg/checkpoint.hpp"
#include "vpiseg/config.hpp"
#include "vpiseg/dataset.hpp"
#include "vpiseg/error.hpp"
#include "vpiseg/grid.hpp"
#include "vpiseg/io.hpp"
#include "vpiseg/losses.hpp"
#include "vpiseg/metrics.hpp"
#include "vpiseg/parallel.hpp"
#include "vpiseg/pgm.hpp"
#include "vpiseg/resample.hpp"
#include "vpiseg/rng.hpp"
#include "vpiseg/synth.hpp"
#include "vpiseg/tensor.hpp"
#include "vpiseg/train.hpp"
#include "vpiseg/unet.hpp"
