from .records import EDIT_CATEGORIES, PairRecord, RecordError, encode_meta
from .sampler import BalancedSampler, EpochEvent, balanced_batches, category_counts
from .shards import MAGIC, ShardFormatError, iter_shard_bytes, load_records, read_shard, write_shard
from .split import DEFAULT_TAU_SPLIT, SplitManifest, split_by_root
from .toy import PALETTE, make_toy_dataset, make_toy_pair
