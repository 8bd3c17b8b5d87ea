#pragma once

// Umbrella header for the whole library.

#include "veloattn/checkpoint.hpp"
#include "veloattn/common.hpp"
#include "veloattn/layers.hpp"
#include "veloattn/losses.hpp"
#include "veloattn/network.hpp"
#include "veloattn/numerics.hpp"
#include "veloattn/sampling.hpp"
#include "veloattn/scan.hpp"
#include "veloattn/synth.hpp"
#include "veloattn/train.hpp"
