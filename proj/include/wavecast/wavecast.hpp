#pragma once

#include "wavecast/autodiff.hpp"
#include "wavecast/config.hpp"
#include "wavecast/dataset.hpp"
#include "wavecast/error.hpp"
#include "wavecast/metrics.hpp"
#include "wavecast/models.hpp"
#include "wavecast/nn.hpp"
#include "wavecast/physics.hpp"
#include "wavecast/synth.hpp"
#include "wavecast/training.hpp"
#include "wavecast/trajectory.hpp"
