# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""SQLite results database for campaign metrics"""

from __future__ import annotations

import logging
import os
import sqlite3

import pandas as pd

from cellfree_mec.campaign import SNAPSHOT_COLUMNS, USER_COLUMNS, MetricsTable
from cellfree_mec.errors import StoreError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

TABLES = {
    "users": USER_COLUMNS,
    "snapshots": SNAPSHOT_COLUMNS,
}


def create_database(path):
    """Create an SQLite database file"""
    try:
        conn = sqlite3.connect(path)
        conn.execute(f"PRAGMA user_version = {SCHEMA_VERSION};")
        conn.close()
        return True
    except sqlite3.Error:
        return False


def table_exists(cursor, table_name):
    """Check if table exists"""
    cursor.execute(
        """
        SELECT name FROM sqlite_master
        WHERE type='table' AND name=?
    """,
        (table_name,),
    )
    return cursor.fetchone() is not None


def get_table_info(cursor, table_name):
    """Get column names and row count of a table"""
    info = {}

    cursor.execute(f"PRAGMA table_info({table_name})")
    info["columns"] = [row[1] for row in cursor.fetchall()]

    cursor.execute(f"SELECT COUNT(*) FROM {table_name}")
    info["row_count"] = cursor.fetchone()[0]
    return info


def create_table(cursor, table_name, columns, if_not_exists=True):
    """Create table with specified columns (mapping name -> SQL type)"""
    if_not_exists_clause = "IF NOT EXISTS " if if_not_exists else ""
    columns_sql = ", ".join(f'"{name}" {sql_type}' for name, sql_type in columns.items())
    sql = f"CREATE TABLE {if_not_exists_clause}{table_name} ({columns_sql})"
    cursor.execute(sql)
    return sql


def _records(frame, columns):
    # NaN and numpy scalars become SQL NULL and Python scalars
    frame = frame[list(columns)].astype(object).where(frame[list(columns)].notna(), None)
    return [tuple(_scalar(value) for value in row) for row in frame.itertuples(index=False)]


def _scalar(value):
    if hasattr(value, "item"):
        return value.item()
    return value


def write_metrics(db_path, metrics: MetricsTable, replace=True):
    """Store a MetricsTable in one transaction, rolling back on error"""
    if not os.path.exists(db_path) and not create_database(db_path):
        raise StoreError(f"Cannot create database file: {db_path}")

    conn = None
    cursor = None
    stored = {}
    try:
        conn = sqlite3.connect(db_path)
        cursor = conn.cursor()
        for table_name, columns in TABLES.items():
            if replace and table_exists(cursor, table_name):
                cursor.execute(f"DELETE FROM {table_name}")
            create_table(cursor, table_name, columns)

            frame = getattr(metrics, table_name)
            placeholders = ", ".join("?" for _ in columns)
            names = ", ".join(f'"{name}"' for name in columns)
            cursor.executemany(
                f"INSERT INTO {table_name} ({names}) VALUES ({placeholders})",
                _records(frame, columns),
            )
            stored[table_name] = get_table_info(cursor, table_name)["row_count"]
        conn.commit()
    except sqlite3.Error as error:
        if conn:
            conn.rollback()
        raise StoreError(f"SQLite error: {str(error)}") from error
    finally:
        if cursor:
            cursor.close()
        if conn:
            conn.close()

    logger.info(
        "%s now holds %d user rows and %d snapshot rows",
        db_path,
        stored["users"],
        stored["snapshots"],
    )
    return db_path


def execute_query(db_path, query, parameters=None):
    """Run a SELECT and return (columns, rows)"""
    if not os.path.exists(db_path):
        raise StoreError(f"Database file does not exist: {db_path}")

    conn = None
    cursor = None
    try:
        conn = sqlite3.connect(db_path)
        cursor = conn.cursor()
        if parameters:
            cursor.execute(query, parameters)
        else:
            cursor.execute(query)
        rows = cursor.fetchall()
        columns = [col[0] for col in cursor.description] if cursor.description else []
    except sqlite3.Error as error:
        raise StoreError(f"SQLite error: {str(error)}") from error
    finally:
        if cursor:
            cursor.close()
        if conn:
            conn.close()
    return columns, rows


def load_metrics(db_path):
    """Read a MetricsTable back from the database"""
    frames = {}
    for table_name, columns in TABLES.items():
        names, rows = execute_query(db_path, f"SELECT * FROM {table_name} ORDER BY rowid")
        missing = set(columns) - set(names)
        if missing:
            raise StoreError(f"Table {table_name} lacks columns: {sorted(missing)}")
        frame = pd.DataFrame(rows, columns=names)[list(columns)]
        for name, sql_type in columns.items():
            if sql_type == "REAL":
                frame[name] = pd.to_numeric(frame[name], errors="coerce").astype(float)
        frames[table_name] = frame
    return MetricsTable(users=frames["users"], snapshots=frames["snapshots"])


def verify_database(db_path):
    """Verify SQLite database integrity"""
    try:
        # First check if file has SQLite header
        with open(db_path, "rb") as f:
            header = f.read(16)
            if not header.startswith(b"SQLite format 3\x00"):
                return False

        conn = sqlite3.connect(db_path)
        cursor = conn.cursor()
        cursor.execute("PRAGMA integrity_check")
        result = cursor.fetchone()
        conn.close()
        return result[0] == "ok"
    except (sqlite3.Error, OSError):
        return False
