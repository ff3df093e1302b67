#pragma once

#include "calibrate.hpp"
#include "classify.hpp"
#include "common.hpp"
#include "experiment.hpp"
#include "features.hpp"
#include "fft.hpp"
#include "obfuscate.hpp"
#include "preprocess.hpp"
#include "selection.hpp"
#include "synth.hpp"
#include "trace.hpp"
