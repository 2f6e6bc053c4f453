from .run_store import RunStore, atomic_write_json, atomic_write_text, config_hash
