#pragma once

#include "rrlstm/config.hpp"
#include "rrlstm/evaluate.hpp"
#include "rrlstm/interpret.hpp"
#include "rrlstm/io.hpp"
#include "rrlstm/metrics.hpp"
#include "rrlstm/nn.hpp"
#include "rrlstm/optim.hpp"
#include "rrlstm/pipeline.hpp"
#include "rrlstm/stats.hpp"
#include "rrlstm/synth.hpp"
#include "rrlstm/tensor.hpp"
#include "rrlstm/timeseries.hpp"
#include "rrlstm/trainer.hpp"
