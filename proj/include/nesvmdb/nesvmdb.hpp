#pragma once

#include "nesvmdb/audio.hpp"
#include "nesvmdb/common.hpp"
#include "nesvmdb/fingerprint.hpp"
#include "nesvmdb/genre.hpp"
#include "nesvmdb/metrics.hpp"
#include "nesvmdb/midi.hpp"
#include "nesvmdb/pairing.hpp"
#include "nesvmdb/segmenter.hpp"
#include "nesvmdb/symbolic.hpp"
#include "nesvmdb/synth.hpp"
#include "nesvmdb/tokenizer.hpp"
