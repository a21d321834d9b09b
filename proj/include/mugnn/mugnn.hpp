#pragma once

#include "mugnn/adjacency.hpp"
#include "mugnn/channels.hpp"
#include "mugnn/encoder.hpp"
#include "mugnn/error.hpp"
#include "mugnn/eval.hpp"
#include "mugnn/kg.hpp"
#include "mugnn/model.hpp"
#include "mugnn/numeric.hpp"
#include "mugnn/objectives.hpp"
#include "mugnn/rules.hpp"
#include "mugnn/synthetic.hpp"
#include "mugnn/trainer.hpp"
