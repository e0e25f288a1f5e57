import os
from unittest import mock

from django.test import SimpleTestCase, override_settings

from lyapcert.conf import DEFAULTS, AnalysisConfig, lyapcert_settings, resolve_config


class ResolveConfigTest(SimpleTestCase):
    """
    Layering of the defaults table, LYAPCERT_SEED, file overrides and flags.
    """

    def test_every_default_has_a_field(self):
        config = AnalysisConfig.from_settings()
        for key in DEFAULTS:
            self.assertEqual(getattr(config, key.lower()), getattr(lyapcert_settings, key))

    @override_settings(LYAPCERT={'HORIZON': 50.0})
    def test_project_settings_override_defaults(self):
        self.assertEqual(resolve_config().horizon, 50.0)
        self.assertEqual(resolve_config().margin, DEFAULTS['MARGIN'])

    @mock.patch.dict(os.environ, {'LYAPCERT_SEED': '17'})
    def test_environment_seed(self):
        self.assertEqual(resolve_config().seed, 17)
        self.assertEqual(resolve_config({'seed': 3}).seed, 3)

    def test_flags_win_over_file(self):
        config = resolve_config({'margin': 1e-6, 'horizon': 10.0}, {'margin': 1e-3, 'horizon': None})
        self.assertEqual(config.margin, 1e-3)
        self.assertEqual(config.horizon, 10.0)

    def test_replace_ignores_unset_values(self):
        config = resolve_config()
        self.assertEqual(config.replace(seed=None), config)
