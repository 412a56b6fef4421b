#pragma once

namespace exhaz {

// Sets the library log level from EXHAZ_LOG (trace, debug, info, warn,
// error, off; default warn). Messages go to stderr.
void init_logging();

}  // namespace exhaz
