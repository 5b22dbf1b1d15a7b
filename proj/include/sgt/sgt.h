/* C API for the forgery-detection pipeline. The shared library wraps the
 * C++ core behind opaque handles and integer status codes so that thin
 * clients (the bundled CLI, language bindings) need no C++ ABI. */

#ifndef SGT_H
#define SGT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct sgt_session sgt_session;

/* Status codes; they double as process exit codes. */
enum {
  SGT_OK = 0,
  SGT_ERR_CONFIG = 2, /* invalid configuration or precondition */
  SGT_ERR_DATA = 3,   /* missing/malformed files, manifests, checkpoints */
  SGT_ERR_NUMERIC = 4 /* non-finite values or failed numeric contracts */
};

/* Default configuration as a JSON object. Static storage; do not free. */
const char* sgt_default_config(void);

/* Space-separated command names. Static storage; do not free. */
const char* sgt_commands(void);

/* Creates a session from a JSON config merged over the defaults. Every key
 * is validated before any work starts. On failure returns a status code and
 * writes a single-line reason into errbuf (if non-NULL). */
int sgt_session_create(const char* config_json, sgt_session** out, char* errbuf,
                       size_t errbuf_len);

void sgt_session_destroy(sgt_session* session);

/* Runs one command by name. Progress goes to stderr, data artifacts to the
 * configured directories. Returns a status code; on failure the message is
 * available via sgt_session_error. */
int sgt_run(sgt_session* session, const char* command);

/* Message for the session's last failed call; "" after a success. */
const char* sgt_session_error(const sgt_session* session);

/* The session's full configuration as JSON. Valid until the next call on
 * this session. */
const char* sgt_session_config(sgt_session* session);

#ifdef __cplusplus
}
#endif

#endif /* SGT_H */
