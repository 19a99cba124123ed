#ifndef ENSEMBLEGAN_H
#define ENSEMBLEGAN_H

/* C interface to the adversarial retrieval-generation ensemble. Every
 * object lives behind an opaque handle; every fallible call returns an
 * eg_status and leaves a description in eg_last_error() on failure.
 * Strings returned through char** are heap copies owned by the caller and
 * must be released with eg_string_free(). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eg_status {
  EG_OK = 0,
  EG_ERR_CONTRACT = 1,   /* a documented precondition was violated */
  EG_ERR_DIMENSION = 2,  /* tensor shape mismatch */
  EG_ERR_DOMAIN = 3,     /* numeric domain violation */
  EG_ERR_IO = 4,         /* file could not be opened or written */
  EG_ERR_FORMAT = 5,     /* malformed file or config content */
  EG_ERR_CORRUPTION = 6, /* digest mismatch in a persisted artifact */
  EG_ERR_VERSION = 7,    /* artifact version is recognized but unsupported */
  EG_ERR_INTERNAL = 8    /* unexpected failure */
} eg_status;

/* Message for the most recent failing call on this thread; empty string
 * once a call succeeds. Valid until the next library call on the thread. */
const char* eg_last_error(void);

const char* eg_version(void);

/* Worker threads used by batched gradient passes; 0 or 1 runs serially. */
void eg_set_thread_cap(unsigned threads);

/* Frees a string the library returned. NULL is a no-op. */
void eg_string_free(char* s);

/* ---- corpus ----------------------------------------------------------- */

typedef struct eg_corpus eg_corpus;

/* Deterministic template-based dialogue corpus split into retrieval /
 * ranking / generation / test partitions. */
eg_status eg_corpus_generate(uint64_t seed, size_t n_pairs, size_t n_topics,
                             size_t paraphrases_per_topic, size_t vocab_max,
                             size_t max_query_len, size_t max_response_len,
                             eg_corpus** out);
/* Reads a directory previously written by eg_corpus_save. */
eg_status eg_corpus_load(const char* dir, size_t max_query_len,
                         size_t max_response_len, eg_corpus** out);
eg_status eg_corpus_save(const eg_corpus* corpus, const char* dir);
/* One-line human-readable summary. */
eg_status eg_corpus_stats(const eg_corpus* corpus, char** out_text);
void eg_corpus_free(eg_corpus* corpus);

/* ---- config ----------------------------------------------------------- */

typedef struct eg_config eg_config;

/* Parses flat "key = value" lines; empty text yields the defaults. origin
 * names the source in error messages. */
eg_status eg_config_from_text(const char* text, const char* origin,
                              eg_config** out);
/* Canonical re-parseable rendering of every key. */
eg_status eg_config_render(const eg_config* config, char** out_text);
void eg_config_free(eg_config* config);

/* ---- retrieval index --------------------------------------------------- */

typedef struct eg_index eg_index;

/* Bag-of-words index over the corpus retrieval pool. by_response selects
 * which side of each pair is indexed (0 = query side, 1 = response side). */
eg_status eg_index_build(const eg_corpus* corpus, int by_response,
                         eg_index** out);
eg_status eg_index_save(const eg_index* index, const char* path);
eg_status eg_index_load(const char* path, eg_index** out);
eg_status eg_index_stats(const eg_index* index, char** out_text);
void eg_index_free(eg_index* index);

/* ---- pretraining ------------------------------------------------------- */

/* Cross-entropy pretraining for the sequence generator; writes a checkpoint
 * to checkpoint_path and reports the final-pass mean loss. */
eg_status eg_pretrain_generator(const eg_config* config,
                                const eg_corpus* corpus, int passes,
                                const char* checkpoint_path,
                                double* out_final_loss);
/* Margin-ranking pretraining for the ranker. Its negative samples need a
 * pretrained generator, which is trained internally first whenever the
 * configured mode uses one. */
eg_status eg_pretrain_ranker(const eg_config* config, const eg_corpus* corpus,
                             int generator_passes, int ranker_passes,
                             const char* checkpoint_path,
                             double* out_final_loss);

/* ---- adversarial training session -------------------------------------- */

typedef struct eg_session eg_session;

/* Full minimax run: pretraining, then the configured number of adversarial
 * epochs. Epoch snapshots land under snapshot_dir/epoch_<n>/ when
 * snapshot_dir is non-NULL and nonempty. Negative pass counts select the
 * built-in defaults. */
eg_status eg_train(const eg_config* config, const eg_corpus* corpus,
                   const char* snapshot_dir, int pretrain_generator_passes,
                   int pretrain_ranker_passes, eg_session** out);
/* Reopens one epoch snapshot directory against the corpus it was trained
 * on; training can then continue with eg_session_advance. */
eg_status eg_session_open(const char* snapshot_dir, const eg_corpus* corpus,
                          eg_session** out);
eg_status eg_session_advance(eg_session* session, int target_epochs,
                             const char* snapshot_dir);
eg_status eg_session_save(const eg_session* session, const char* dir);
/* Completed adversarial epochs; negative only on a NULL handle. */
int eg_session_epoch(const eg_session* session);
/* "ensemblegan", "rankgan", or "irgan"; empty string on a NULL handle. */
const char* eg_session_mode(const eg_session* session);
/* series is "g1", "g2", or "d". Copies up to capacity entries into buffer
 * and always stores the full length in out_count, so a capacity-0 call
 * sizes the buffer. */
eg_status eg_session_history(const eg_session* session, const char* series,
                             double* buffer, size_t capacity,
                             size_t* out_count);
/* Serves one query: top k_retrieved index hits plus n_generated decodes,
 * reranked by the discriminator (use_g2 = 0) or the ranking generator
 * (use_g2 = 1). The JSON carries the chosen response, its provenance, and
 * the top_scores best candidates with scores. */
eg_status eg_session_respond(const eg_session* session, const char* query_text,
                             int use_g2, int k_retrieved, int n_generated,
                             uint64_t seed, int top_scores, char** out_json);
/* Metric report over the corpus test set, one "system.metric = value" line
 * per entry. */
eg_status eg_session_evaluate(const eg_session* session, int use_g2,
                              int k_retrieved, int n_generated,
                              int n_distractors, uint64_t seed,
                              char** out_text);
void eg_session_free(eg_session* session);

/* ---- self checks ------------------------------------------------------- */

/* Runs the built-in invariant suite and returns EG_OK only when every check
 * passes. The report holds one line per check either way. */
eg_status eg_selftest(uint64_t seed, char** out_report);

#ifdef __cplusplus
}
#endif

#endif /* ENSEMBLEGAN_H */
