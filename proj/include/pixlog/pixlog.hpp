#pragma once

// Umbrella header for the whole toolkit.

#include "pixlog/baselines.hpp"
#include "pixlog/builders.hpp"
#include "pixlog/checkpoint_io.hpp"
#include "pixlog/common.hpp"
#include "pixlog/eval.hpp"
#include "pixlog/events.hpp"
#include "pixlog/forest.hpp"
#include "pixlog/gamelog.hpp"
#include "pixlog/gradcheck.hpp"
#include "pixlog/image.hpp"
#include "pixlog/ingest.hpp"
#include "pixlog/manifest.hpp"
#include "pixlog/metrics.hpp"
#include "pixlog/model.hpp"
#include "pixlog/synth.hpp"
#include "pixlog/tensor.hpp"
#include "pixlog/train.hpp"
#include "pixlog/transfer.hpp"
