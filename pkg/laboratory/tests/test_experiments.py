import json
import os
import tempfile
from fractions import Fraction

import pandas as pd
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from laboratory.exceptions import CatalogError, ConfigurationError
from laboratory.services.experiments.acceptance import suite_parameters
from laboratory.services.experiments.artifacts import ArtifactWriter, tagged_number
from laboratory.services.experiments.catalog import FigureCatalog
from laboratory.services.experiments.runner import (
    CheckResult, ExperimentConfig, ExperimentReport, run_figure,
)
from laboratory.services.mops import counting_measure
from laboratory.services.numerics import ComplexPoly, PrecisionCtx


def write_catalog(directory, figures):
    path = os.path.join(directory, 'figures.json')
    with open(path, 'w', encoding='utf-8') as f:
        json.dump({'schema_version': 1, 'figures': figures}, f)
    return path


class CatalogTests(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def test_shipped_catalog(self):
        catalog = FigureCatalog()
        self.assertIn('figure_zeros_N=30', catalog)
        self.assertIn('figure_numerics_supports', catalog)
        self.assertEqual(list(catalog), sorted(catalog.figures))
        spec = catalog.get('figure_zeros_N=30')
        self.assertEqual(spec.max_N, 30)
        self.assertEqual(catalog.get('figure_numerics_supports').kind, 'supports')

    def test_indices_are_distinct_and_filtered(self):
        catalog = FigureCatalog()
        indices = catalog.indices(max_N=30, K=3)
        labels = [index.label for index in indices]
        self.assertEqual(len(labels), len(set(labels)))
        self.assertTrue(all(index.N <= 30 and index.K == 3 for index in indices))

    def test_unknown_id(self):
        with self.assertRaises(CatalogError) as cm:
            FigureCatalog().get('figure_nope')
        self.assertEqual(cm.exception.figure_id, 'figure_nope')

    def test_missing_file(self):
        with self.assertRaises(CatalogError):
            FigureCatalog(os.path.join(self.directory.name, 'absent.json'))

    def test_without_figures_key(self):
        path = os.path.join(self.directory.name, 'empty.json')
        with open(path, 'w', encoding='utf-8') as f:
            json.dump({'schema_version': 1}, f)
        with self.assertRaises(CatalogError):
            FigureCatalog(path)

    def test_invalid_entries(self):
        cases = {
            'bad_kind': {'kind': 'movie', 'panels': [{'n': 1, 'm': 2}]},
            'no_panels': {'kind': 'zeros'},
            'no_alphas': {'kind': 'supports'},
            'bad_overlay': {'panels': [{'n': 1, 'm': 2}], 'overlay': ['delta4']},
            'overlay_K5': {
                'K': 5, 'panels': [{'n': 1, 'm': 2}], 'overlay': ['delta1'],
                'contour_n': {'ell': 0, 'kappa': 3}, 'contour_m': {'ell': 2, 'kappa': 3},
            },
            'bad_contour': {'panels': [{'n': 1, 'm': 2}], 'contour_n': {'ell': 1, 'kappa': 1}},
            'bad_index': {'panels': [{'n': 0, 'm': 0}]},
            'K5_default_contours': {'K': 5, 'panels': [{'n': 1, 'm': 2}]},
        }
        for name, entry in cases.items():
            with self.subTest(name):
                path = write_catalog(self.directory.name, {name: entry})
                with self.assertRaises(CatalogError) as cm:
                    FigureCatalog(path)
                self.assertEqual(cm.exception.figure_id, name)

    def test_panel_alphas(self):
        path = write_catalog(self.directory.name, {
            'small': {'panels': [{'n': 1, 'm': 2}, {'n': 2, 'm': 8}]},
            'sweep': {'kind': 'supports', 'alphas': ['0.15', '0.3'], 'overlay': ['delta1']},
        })
        catalog = FigureCatalog(path)
        self.assertEqual(catalog.get('small').panel_alphas(), [Fraction(1, 3), Fraction(1, 5)])
        self.assertEqual(catalog.get('sweep').panel_alphas(), ['0.15', '0.3'])
        self.assertEqual(catalog.get('sweep').max_N, 0)


class ExperimentConfigTests(SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(ConfigurationError) as cm:
            ExperimentConfig(experiment_id='x', digits=60, jobs=0)
        self.assertEqual(cm.exception.setting, 'jobs')
        with self.assertRaises(ConfigurationError) as cm:
            ExperimentConfig(experiment_id='x', digits=60, formats=('json', 'png'))
        self.assertEqual(cm.exception.setting, 'format')

    def test_from_settings(self):
        with override_settings(MOPS_LAB=dict(settings.MOPS_LAB, DEFAULT_DIGITS=150, JOBS=2)):
            config = ExperimentConfig.from_settings('figure_zeros_N=30')
        self.assertEqual(config.digits, 150)
        self.assertEqual(config.jobs, 2)
        self.assertEqual(config.ctx.digits, 150)

    def test_large_degrees_need_precision(self):
        config = ExperimentConfig(experiment_id='x', digits=60)
        config.require_digits_for(20)
        with self.assertRaises(ConfigurationError):
            config.require_digits_for(21)
        ExperimentConfig(experiment_id='x', digits=100).require_digits_for(50)


class ExperimentReportTests(SimpleTestCase):
    def test_exit_codes(self):
        report = ExperimentReport(experiment_id='x', inputs={})
        report.add(CheckResult(name='a', passed=True))
        report.add(CheckResult(name='hint', passed=False, flag_only=True))
        self.assertTrue(report.passed)
        self.assertEqual(report.exit_code, 0)
        report.add(CheckResult(name='b', passed=False))
        self.assertEqual(report.exit_code, 1)
        self.assertFalse(report.check('b').passed)
        report.failures.append({'panel': 'n1_m2', 'error': 'singular'})
        self.assertEqual(report.exit_code, 3)

    def test_as_dict(self):
        report = ExperimentReport(experiment_id='x', inputs={'digits': 60}, wall_time=1.23456, files=['b', 'a'])
        report.add(CheckResult(name='a', passed=True, measured='1e-70', tolerance='1e-30'))
        payload = report.as_dict()
        self.assertEqual(payload['wall_time_seconds'], 1.235)
        self.assertEqual(payload['files'], ['a', 'b'])
        self.assertEqual(payload['checks'][0]['measured'], '1e-70')
        self.assertTrue(payload['passed'])


class ArtifactWriterTests(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)
        self.writer = ArtifactWriter('run', self.directory.name)
        self.ctx = PrecisionCtx(digits=30)

    def test_json_carries_schema_version(self):
        path = self.writer.json('out.json', {'alpha': tagged_number(self.ctx.mp.mpf('0.2'), self.ctx)})
        with open(path, encoding='utf-8') as f:
            payload = json.load(f)
        self.assertEqual(payload['schema_version'], settings.MOPS_LAB['SCHEMA_VERSION'])
        self.assertEqual(payload['alpha']['digits'], 30)
        self.assertTrue(payload['alpha']['value'].startswith('0.2'))

    def test_files_are_written_once(self):
        self.writer.csv('t.csv', pd.DataFrame({'x': [1.0]}))
        with self.assertRaises(ValueError):
            self.writer.csv('t.csv', pd.DataFrame({'x': [2.0]}))
        self.assertEqual(len(self.writer.manifest), 1)

    def test_zeros_csv(self):
        mp = self.ctx.mp
        zeros = {'P': [(mp.mpc(1, 2), 2), (mp.mpc(-1), 1)], 'A': [mp.mpc(0, 3)], 'B': []}
        frame = pd.read_csv(self.writer.zeros_csv('z.csv', zeros, self.ctx))
        self.assertEqual(list(frame.columns), ['re', 'im', 'multiplicity', 'polynomial'])
        self.assertEqual(frame['multiplicity'].tolist(), [2, 1, 1])
        self.assertEqual(frame['polynomial'].tolist(), ['P', 'P', 'A'])
        self.assertAlmostEqual(frame['im'][0], 2.0)

    def test_double_root_is_one_row(self):
        # (z - 1)^2 (z + 1)
        poly = ComplexPoly((1, -1, -1, 1), self.ctx)
        measure = counting_measure(poly, 3, self.ctx)
        frame = pd.read_csv(self.writer.zeros_csv('double.csv', {'P': measure.atoms}, self.ctx))
        self.assertEqual(len(frame), 2)
        self.assertEqual(sorted(frame['multiplicity']), [1, 2])
        self.assertEqual(frame['multiplicity'].sum(), 3)

    def test_svg_records_affine_map(self):
        path = self.writer.overlay_svg(
            'z.svg', 'zeros', {'P': [1 + 1j, -1 + 0.5j]}, {'delta1': [[-1, 2]]},
        )
        with open(path, encoding='utf-8') as f:
            text = f.read()
        self.assertIn('x_svg = ', text)
        self.assertIn('* re +', text)
        self.assertIn('y_svg = ', text)


class SuiteParameterTests(SimpleTestCase):
    def test_suites(self):
        fast = suite_parameters('fast')
        self.assertEqual((fast.digits, fast.max_N, fast.runtime_budget), (200, 30, 900))
        full = suite_parameters('primary-all')
        self.assertEqual((full.max_N, full.runtime_budget), (50, 7200))
        self.assertTrue(all(small[0] + small[1] <= full.max_N for *_, small, _large in full.weak_limit))
        with self.assertRaises(ConfigurationError) as cm:
            suite_parameters('nightly')
        self.assertEqual(cm.exception.setting, 'suite')


class RunFigureTests(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)
        root = self.directory.name
        override = override_settings(MOPS_LAB=dict(
            settings.MOPS_LAB, CACHE_DIR=os.path.join(root, 'cache'), OUTPUT_DIR=os.path.join(root, 'out'),
        ))
        override.enable()
        self.addCleanup(override.disable)
        self.catalog = FigureCatalog(write_catalog(root, {
            'figure_small=1': {'title': 'small', 'panels': [{'n': 1, 'm': 2}, {'n': 2, 'm': 4}]},
            'figure_sweep': {'kind': 'supports', 'alphas': ['0.15'], 'overlay': ['delta1', 'delta2']},
        }))

    def test_zero_panels(self):
        config = ExperimentConfig.from_settings('figure_small=1', digits=60)
        report = run_figure('figure_small=1', config=config, catalog=self.catalog)
        self.assertEqual(report.exit_code, 0)
        self.assertTrue(report.check('n2_m4:orthogonality').passed)
        directory = os.path.join(settings.MOPS_LAB['OUTPUT_DIR'], 'figure_small1')
        for name in ('report.json', 'n1_m2_zeros.csv', 'n2_m4_zeros.csv', 'n2_m4.svg'):
            self.assertTrue(os.path.exists(os.path.join(directory, name)), name)
        with open(os.path.join(directory, 'report.json'), encoding='utf-8') as f:
            payload = json.load(f)
        self.assertIn('wall_time_seconds', payload)
        self.assertEqual(payload['inputs']['panels'], [[1, 2], [2, 4]])
        frame = pd.read_csv(os.path.join(directory, 'n2_m4_zeros.csv'))
        self.assertEqual(frame.loc[frame['polynomial'] == 'P', 'multiplicity'].sum(), 6)

    def test_support_sweep(self):
        config = ExperimentConfig.from_settings('figure_sweep', digits=60, formats=('json',))
        report = run_figure('figure_sweep', config=config, catalog=self.catalog)
        self.assertEqual(report.failures, [])
        self.assertEqual(report.check('alpha_0.15:topology').detail['regime'], 'subcritical')
        directory = os.path.join(settings.MOPS_LAB['OUTPUT_DIR'], 'figure_sweep')
        with open(os.path.join(directory, 'alpha_0.15_supports.json'), encoding='utf-8') as f:
            payload = json.load(f)
        self.assertIn('delta2', payload['arcs'])
        self.assertFalse(os.path.exists(os.path.join(directory, 'alpha_0.15.svg')))
