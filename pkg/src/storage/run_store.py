import hashlib
import json
import logging
import os
import sqlite3
import tempfile
import threading
from datetime import datetime, timezone

logger = logging.getLogger("storage.run_store")

DB_FILE = 'runs.db'


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def atomic_write_text(path: str, text: str):
    """Write text so that readers see either the old file or the whole new one."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def atomic_write_json(path: str, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


class RunStore:
    """Registry of experiment runs, one row per (kind, config hash)."""

    def __init__(self, db_file: str = DB_FILE):
        db_dir = os.path.dirname(db_file)
        if db_dir and not os.path.exists(db_dir):
            os.makedirs(db_dir, exist_ok=True)

        self.db_file = db_file
        self._lock = threading.Lock()

        try:
            self.conn = sqlite3.connect(db_file, check_same_thread=False)
            self.conn.row_factory = sqlite3.Row
            logger.debug(f"Connected to '{db_file}'")
        except sqlite3.Error as e:
            raise RuntimeError(f"Error connecting to run registry: {e}")

    def close_connection(self):
        if self.conn:
            self.conn.close()
            self.conn = None
            logger.debug(f"Closed connection to '{self.db_file}'")

    def _execute(self, query: str, params: tuple = (), fetch: str = None):
        with self._lock:
            cursor = self.conn.cursor()
            cursor.execute(query, params)
            if fetch == 'one':
                result = cursor.fetchone()
            elif fetch == 'all':
                result = cursor.fetchall()
            else:
                self.conn.commit()
                result = cursor.lastrowid if cursor.lastrowid != 0 else cursor.rowcount
            cursor.close()
            return result

    def initialize_database(self):
        create_table = """
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            kind TEXT NOT NULL,
            config_hash TEXT NOT NULL,
            master_seed INTEGER,
            out_dir TEXT,
            summary_json TEXT,
            first_seen_timestamp TEXT NOT NULL,
            last_seen_timestamp TEXT NOT NULL,
            UNIQUE(kind, config_hash)
        );
        """
        self._execute(create_table)
        logger.debug("'runs' table ready.")

    def record_run(self, kind: str, config: dict, master_seed, out_dir: str, summary: dict) -> bool:
        now_iso = datetime.now(timezone.utc).isoformat()
        query = """
        INSERT INTO runs (kind, config_hash, master_seed, out_dir, summary_json,
                          first_seen_timestamp, last_seen_timestamp)
        VALUES (?, ?, ?, ?, ?, ?, ?)
        ON CONFLICT(kind, config_hash) DO UPDATE SET
            master_seed = excluded.master_seed,
            out_dir = excluded.out_dir,
            summary_json = excluded.summary_json,
            last_seen_timestamp = excluded.last_seen_timestamp;
        """
        params = (kind, config_hash(config), master_seed, out_dir,
                  json.dumps(summary, sort_keys=True), now_iso, now_iso)
        try:
            self._execute(query, params)
            return True
        except sqlite3.Error as e:
            logger.error(f"Recording {kind} run failed: {e}")
            return False

    def get_run(self, kind: str, digest: str):
        query = "SELECT * FROM runs WHERE kind = ? AND config_hash = ?;"
        return self._execute(query, (kind, digest), fetch='one')

    def list_runs(self, kind: str = None):
        if kind is None:
            return self._execute("SELECT * FROM runs ORDER BY id;", fetch='all')
        return self._execute("SELECT * FROM runs WHERE kind = ? ORDER BY id;", (kind,), fetch='all')

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close_connection()


if __name__ == '__main__':
    test_db = 'test_runs.db'
    if os.path.exists(test_db): os.remove(test_db)

    with RunStore(db_file=test_db) as store:
        store.initialize_database()

        cfg = {"trials": 10, "seed": 1}
        assert store.record_run('lockin', cfg, 1, 'out', {"frequency": 1.0})
        print(dict(store.get_run('lockin', config_hash(cfg))))

        assert store.record_run('lockin', cfg, 1, 'out2', {"frequency": 0.9})
        print(dict(store.get_run('lockin', config_hash(cfg))))
        assert len(store.list_runs('lockin')) == 1

    if os.path.exists(test_db): os.remove(test_db)
