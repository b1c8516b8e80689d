"""mlirkit: a multilingual information-retrieval toolkit.

Sparse (BM25) and late-interaction (MaxSim) ranking over one
multilingual collection, MaxP passage aggregation, deterministic
training-triple batch schedules, merged-qrels evaluation, and
language-bias diagnostics.
"""

from .dense import (
    EmbeddingStore,
    ScorerKind,
    SingleVector,
    TokenMatrix,
    build_embedding_store,
    dense_search,
    load_store,
    maxp_aggregate,
    maxsim_score,
    save_store,
    single_vector_score,
    toy_embed,
    toy_embed_single,
)
from .errors import (
    AlignmentError,
    ConfigError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyQueryError,
    FormatError,
    MlirkitError,
)
from .evaluation import (
    ALL_LANGUAGES,
    BiasReport,
    MergedQrels,
    Run,
    average_precision,
    bias_report,
    evaluate_run,
    merge_qrels,
    precision_at_10,
    r_precision,
    recall_at_mlir_relevant,
)
from .mixing import (
    MixConfig,
    MixMode,
    MixSchedule,
    Triple,
    emit_combined_file,
    mix_round_robin,
    read_triples,
    schedule_batches,
    shuffle_aligned,
    split_combined_file,
)
from .sparse import (
    BM25Params,
    CollectionStats,
    InvertedIndex,
    bm25_score,
    build_index,
    sparse_search,
)
from .stats import bonferroni_adjust, ks_two_sample, paired_t_test
from .text import (
    AnalyzerConfig,
    Document,
    Passage,
    Query,
    analyze,
    split_passages,
    strip_stop_structure,
)
from .timing import TimingLedger, timing_report

__version__ = "0.1.0"
