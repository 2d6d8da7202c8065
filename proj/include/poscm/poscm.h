#ifndef POSCM_H
#define POSCM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define POSCM_API __declspec(dllexport)
#else
#define POSCM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    POSCM_OK = 0,
    POSCM_ERR_ARGUMENT = 1,
    POSCM_ERR_DOMAIN = 2,
    POSCM_ERR_CONFIG = 3,
    POSCM_ERR_STATISTICS = 4,
    POSCM_ERR_SIMULATION = 5,
    POSCM_ERR_IDENTIFICATION = 6,
    POSCM_ERR_IO = 7,
    POSCM_ERR_INTERNAL = 8
} poscm_status;

typedef struct poscm_protocol poscm_protocol;
typedef struct poscm_result poscm_result;
typedef struct poscm_model poscm_model;

POSCM_API const char* poscm_version(void);

/* Message of the last failing call on this thread; empty if none. */
POSCM_API const char* poscm_last_error(void);

/* Strings returned through char** out-parameters are owned by the caller. */
POSCM_API void poscm_string_free(char* s);

POSCM_API poscm_status poscm_protocol_load(const char* path, poscm_protocol** out);
POSCM_API poscm_status poscm_protocol_parse(const char* json, const char* base_dir, poscm_protocol** out);
POSCM_API void poscm_protocol_free(poscm_protocol* p);
POSCM_API poscm_status poscm_protocol_override_seeds(poscm_protocol* p, uint64_t base);
/* 16 hex digits plus terminator. */
POSCM_API poscm_status poscm_protocol_hash(const poscm_protocol* p, char out[17]);
POSCM_API poscm_status poscm_protocol_experiment(const poscm_protocol* p, char** out);

/* threads == 0 reads POSCM_THREADS, falling back to 1. */
POSCM_API poscm_status poscm_run(const poscm_protocol* p, const char* out_dir, unsigned threads, poscm_result** out);
POSCM_API void poscm_result_free(poscm_result* r);
POSCM_API int poscm_result_passed(const poscm_result* r);
POSCM_API size_t poscm_result_check_count(const poscm_result* r);
/* Borrowed pointers, valid until poscm_result_free. */
POSCM_API poscm_status poscm_result_check(const poscm_result* r, size_t index, const char** name, int* passed,
                                          const char** detail);
POSCM_API double poscm_result_wall_clock(const poscm_result* r);
POSCM_API const char* poscm_result_hash(const poscm_result* r);

POSCM_API poscm_status poscm_model_load(const char* path, poscm_model** out);
POSCM_API poscm_status poscm_model_parse(const char* json, poscm_model** out);
POSCM_API void poscm_model_free(poscm_model* m);
POSCM_API size_t poscm_model_node_count(const poscm_model* m);
/* One JSON object per line for replicates 0..count-1 of seed; regime_json may
   be NULL for the observational regime. */
POSCM_API poscm_status poscm_model_sample(const poscm_model* m, const char* regime_json, uint64_t seed, size_t count,
                                          unsigned threads, char** out);

#ifdef __cplusplus
}
#endif

#endif
