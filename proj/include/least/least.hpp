#pragma once

#include "least/classifier.hpp"
#include "least/corpus.hpp"
#include "least/dom.hpp"
#include "least/errors.hpp"
#include "least/eval.hpp"
#include "least/reweighting.hpp"
#include "least/rng.hpp"
#include "least/self_training.hpp"
#include "least/synth.hpp"
#include "least/text.hpp"
#include "least/weak_supervision.hpp"
