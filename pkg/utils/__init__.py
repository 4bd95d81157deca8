from utils.utils import derive_rng, version_string, to_jsonable, write_json, read_json, write_jsonl, entropy, \
    summarize_dataframe, PACKAGE_VERSION
from utils import exceptions
