#pragma once

#include "ttp/adapter.hpp"
#include "ttp/attacks.hpp"
#include "ttp/augment.hpp"
#include "ttp/detector.hpp"
#include "ttp/encoder.hpp"
#include "ttp/ensemble.hpp"
#include "ttp/errors.hpp"
#include "ttp/image.hpp"
#include "ttp/padding.hpp"
#include "ttp/pipeline.hpp"
#include "ttp/zero_shot.hpp"
