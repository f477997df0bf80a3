#pragma once

#include "freqtune/attack.hpp"
#include "freqtune/common.hpp"
#include "freqtune/eval.hpp"
#include "freqtune/image_io.hpp"
#include "freqtune/perception.hpp"
#include "freqtune/run_config.hpp"
#include "freqtune/synth.hpp"
#include "freqtune/texclass.hpp"
#include "freqtune/transform.hpp"
