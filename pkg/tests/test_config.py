#!/usr/bin/env python
# -*- coding: utf-8 -*-

from core.config import Config


def test_defaults(monkeypatch):
    for name in ("SCANN_SEED", "SCANN_WORKERS", "SCANN_SAMPLES", "SCANN_CHECKPOINTS"):
        monkeypatch.delenv(name, raising=False)
    cfg = Config()
    assert cfg.DEFAULT_SEED == 0
    assert cfg.DEFAULT_SAMPLES == 1000
    assert cfg.checkpoint_list() == [1, 3, 10, 30, 100, 300, 1000]
    assert cfg.validate()


def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("SCANN_DATA_DIR", str(tmp_path))
    monkeypatch.setenv("SCANN_CHECKPOINTS", "1,10")
    cfg = Config()
    assert cfg.DATA_DIR == str(tmp_path)
    assert cfg.checkpoint_list() == [1, 10]
    assert cfg.to_dict()["data_dir"] == str(tmp_path)


def test_invalid_checkpoints_fail_validation(monkeypatch):
    monkeypatch.setenv("SCANN_CHECKPOINTS", "10,3")
    assert not Config().validate()


def test_log_config_has_rotating_file():
    log_config = Config().get_log_config()
    assert log_config["handlers"]["file"]["class"] == "logging.handlers.RotatingFileHandler"
    assert log_config["handlers"]["file"]["maxBytes"] == 10 * 1024 * 1024
