#pragma once

#include "pcdetect/attacks.hpp"
#include "pcdetect/consistency.hpp"
#include "pcdetect/dataset.hpp"
#include "pcdetect/error.hpp"
#include "pcdetect/experiment.hpp"
#include "pcdetect/features.hpp"
#include "pcdetect/matrix.hpp"
#include "pcdetect/nn/checkpoint.hpp"
#include "pcdetect/nn/gradcheck.hpp"
#include "pcdetect/nn/model.hpp"
#include "pcdetect/nn/spec.hpp"
#include "pcdetect/nn/train.hpp"
#include "pcdetect/priority.hpp"
#include "pcdetect/rng.hpp"
