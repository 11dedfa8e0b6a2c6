import logging
import os

import yaml


class DefaultsResolver:
    class __DefaultsResolver:
        def __init__(self, path):
            with open(path) as defaults_file:
                self.storage = yaml.safe_load(defaults_file)
            self.path = path
            logging.getLogger("DefaultsResolver").debug("Loaded defaults from %s" % path)

        def run(self, key):
            return self.storage["run"][key]

        def intercepts(self, prevalence):
            key = self.__prevalence_key(prevalence)
            if key not in self.storage["prevalence"]:
                raise ValueError("No intercept preset for prevalence {0}. Available: {1}".format(
                    prevalence, ", ".join(sorted(self.storage["prevalence"]))))
            return dict(self.storage["prevalence"][key])

        def prevalences(self):
            return sorted(float(key) for key in self.storage["prevalence"])

        def calibration(self):
            return [dict(row) for row in self.storage["calibration"]]

        def set_run_default(self, key, value):
            self.storage["run"][key] = value

        @staticmethod
        def __prevalence_key(prevalence):
            return "{0:g}".format(float(prevalence))

    DEFAULT_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "defaults.yaml")

    instance = None

    def __init__(self):
        if DefaultsResolver.instance is None:
            path = os.environ.get("RECURWEIGHT_DEFAULTS", self.DEFAULT_PATH)
            DefaultsResolver.instance = DefaultsResolver.__DefaultsResolver(path)

    def __getattr__(self, name):
        return getattr(self.instance, name)

    @classmethod
    def reset(cls):
        cls.instance = None
