#ifndef CONVSQL_H
#define CONVSQL_H

#pragma once

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ConvsqlStatus {
  CONVSQL_STATUS_OK = 0,
  CONVSQL_STATUS_NULL_ARGUMENT = 1,
  CONVSQL_STATUS_INVALID_UTF8 = 2,
  CONVSQL_STATUS_INVALID_CONFIG = 3,
  CONVSQL_STATUS_LOAD_FAILED = 4,
  CONVSQL_STATUS_INVALID_SQL = 5,
  CONVSQL_STATUS_PANIC = 6,
} ConvsqlStatus;

// Opaque environment handle.
typedef struct ConvsqlEnv ConvsqlEnv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Opens an environment from a TOML run config file.
//
// # Safety
// `config_path` must be a NUL-terminated string and `out` a writable pointer.
enum ConvsqlStatus convsql_env_open(const char *config_path, struct ConvsqlEnv **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `env` must come from [`convsql_env_open`] and not be used afterwards.
void convsql_env_free(struct ConvsqlEnv *env);

// Answers one protocol request. Protocol-level failures come back as a
// JSON error reply with status `Ok`.
//
// # Safety
// `env` must be a live handle, `request` NUL-terminated, `out_reply` writable.
enum ConvsqlStatus convsql_env_request(const struct ConvsqlEnv *env,
                                       const char *request,
                                       char **out_reply);

// Clause-level F1 between two SQL strings, without schema resolution.
//
// # Safety
// `pred` and `gold` must be NUL-terminated and `out` writable.
enum ConvsqlStatus convsql_clause_f1(const char *pred, const char *gold, double *out);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void convsql_string_free(char *s);

// Message for the last failing call on this thread, or null. Valid until the
// next call on the same thread.
const char *convsql_last_error(void);

uint32_t convsql_protocol_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CONVSQL_H */
