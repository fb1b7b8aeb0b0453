#include "gamo/error.hpp"

namespace gamo {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_scores: return "invalid_scores";
    case Errc::invalid_image: return "invalid_image";
    case Errc::invalid_config: return "invalid_config";
    case Errc::backend_load: return "backend_load";
    case Errc::no_face: return "no_face";
    case Errc::incomplete_registration: return "incomplete_registration";
    case Errc::unregistered_player: return "unregistered_player";
    case Errc::illegal_state: return "illegal_state";
    case Errc::session_over: return "session_over";
    case Errc::io: return "io";
    case Errc::parse: return "parse";
    case Errc::dangling_record: return "dangling_record";
    case Errc::empty_dataset: return "empty_dataset";
    case Errc::incomplete_study: return "incomplete_study";
  }
  return "unknown";
}

}  // namespace gamo
