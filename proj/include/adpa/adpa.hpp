#pragma once

#include "adpa/amud.hpp"
#include "adpa/common.hpp"
#include "adpa/datagen.hpp"
#include "adpa/graph.hpp"
#include "adpa/homophily.hpp"
#include "adpa/io.hpp"
#include "adpa/labels.hpp"
#include "adpa/model.hpp"
#include "adpa/pipeline.hpp"
#include "adpa/propagation.hpp"
#include "adpa/tape.hpp"
#include "adpa/training.hpp"
