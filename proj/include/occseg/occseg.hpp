#pragma once

#include "boxes.hpp"
#include "detect.hpp"
#include "energy.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "hog.hpp"
#include "hop.hpp"
#include "image.hpp"
#include "loss.hpp"
#include "maxflow.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "pyramid.hpp"
#include "qp.hpp"
#include "segmentation.hpp"
#include "synth.hpp"
#include "train.hpp"
#include "io.hpp"
