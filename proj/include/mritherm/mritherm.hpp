#pragma once

#include "mritherm/data.hpp"
#include "mritherm/errors.hpp"
#include "mritherm/eval.hpp"
#include "mritherm/image.hpp"
#include "mritherm/imgproc.hpp"
#include "mritherm/nn.hpp"
#include "mritherm/rng.hpp"
#include "mritherm/tensor.hpp"
#include "mritherm/train.hpp"
#include "mritherm/weights.hpp"
