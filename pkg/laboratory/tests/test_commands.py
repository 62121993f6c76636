import json
import os
import tempfile
from io import StringIO
from unittest import mock

import pandas as pd
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings

from laboratory.management.commands._common import parse_alpha, parse_contours
from laboratory.models import ExperimentRun
from laboratory.services.experiments.runner import CheckResult, ExperimentReport
from laboratory.tasks import run_figure_task


class LaboratoryPathsMixin:
    """Points CACHE_DIR, OUTPUT_DIR and FIGURE_CATALOG at a temporary directory."""

    def setUp(self):
        super().setUp()
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)
        root = self.directory.name
        catalog = os.path.join(root, 'figures.json')
        with open(catalog, 'w', encoding='utf-8') as f:
            json.dump({'schema_version': 1, 'figures': {
                'figure_tiny': {'title': 'tiny', 'panels': [{'n': 1, 'm': 2}]},
            }}, f)
        override = override_settings(MOPS_LAB=dict(
            settings.MOPS_LAB,
            CACHE_DIR=os.path.join(root, 'cache'),
            OUTPUT_DIR=os.path.join(root, 'out'),
            FIGURE_CATALOG=catalog,
        ))
        override.enable()
        self.addCleanup(override.disable)

    def call(self, *args, **options):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO(), **options)
        return out.getvalue()


class ArgumentParsingTests(SimpleTestCase):
    def test_parse_alpha(self):
        self.assertEqual(str(parse_alpha('3/10')), '3/10')
        self.assertEqual(parse_alpha('0.38'), '0.38')
        for text in ('0.5', '0', 'abc', '1/0', '-0.1'):
            with self.subTest(text):
                with self.assertRaises(CommandError) as cm:
                    parse_alpha(text)
                self.assertEqual(cm.exception.returncode, 2)

    def test_parse_contours(self):
        for text in ('0,3,2,3', '0,3;2,3', ' 0,3,2,3 '):
            with self.subTest(text):
                contour_n, contour_m = parse_contours(text, 5)
                self.assertEqual((contour_n.ell, contour_n.kappa, contour_m.ell, contour_m.kappa), (0, 3, 2, 3))
        for text in ('0,3', '0;2', '0,3,2', '0,3,2,3,1', '0;3;2;3', '1,1,0,2', '1,1;0,2', 'x,y;0,2'):
            with self.subTest(text):
                with self.assertRaises(CommandError) as cm:
                    parse_contours(text, 5)
                self.assertEqual(cm.exception.returncode, 2)


class FinishTests(SimpleTestCase):
    def test_report_exit_code_becomes_return_code(self):
        from laboratory.management.commands.figure import Command

        command = Command(stdout=StringIO())
        report = ExperimentReport(experiment_id='x', inputs={})
        report.add(CheckResult(name='ok', passed=True))
        command.finish(report)
        report.add(CheckResult(name='bad', passed=False))
        with self.assertRaises(CommandError) as cm:
            command.finish(report)
        self.assertEqual(cm.exception.returncode, 1)


class SolveCommandTests(LaboratoryPathsMixin, SimpleTestCase):
    def test_solve_writes_outputs(self):
        output = self.call('solve', n=1, m=2, digits=60)
        self.assertIn('Solved', output)
        directory = os.path.join(settings.MOPS_LAB['OUTPUT_DIR'], 'solve_n1_m2_K3_l0_k2_K3_l1_k2')
        self.assertEqual(
            sorted(os.listdir(directory)), ['coeffs.json', 'conditioning.json', 'zeros.csv', 'zeros.svg'],
        )
        with open(os.path.join(directory, 'coeffs.json'), encoding='utf-8') as f:
            coeffs = json.load(f)
        self.assertEqual(coeffs['digits'], 60)
        self.assertEqual(len(coeffs['coefficients']['P']), 4)
        leading = coeffs['coefficients']['P'][-1]
        self.assertIsInstance(leading['re'], str)
        self.assertEqual((float(leading['re']), leading['digits']), (1.0, 60))
        with open(os.path.join(directory, 'conditioning.json'), encoding='utf-8') as f:
            conditioning = json.load(f)
        self.assertEqual(conditioning['exists'], {'typeI': True, 'typeII': True})
        self.assertIn('pivot_ratio', conditioning['conditioning'])
        frame = pd.read_csv(os.path.join(directory, 'zeros.csv'))
        self.assertEqual(list(frame.columns), ['re', 'im', 'multiplicity', 'polynomial'])
        self.assertEqual(frame.loc[frame['polynomial'] == 'P', 'multiplicity'].sum(), 3)

    def test_format_selection(self):
        self.call('solve', n=1, m=2, digits=60, formats=['json'])
        directory = os.path.join(settings.MOPS_LAB['OUTPUT_DIR'], 'solve_n1_m2_K3_l0_k2_K3_l1_k2')
        self.assertEqual(sorted(os.listdir(directory)), ['coeffs.json', 'conditioning.json'])

    def test_contours_in_four_integer_form(self):
        self.call('solve', n=1, m=2, contours='0,2,1,2', digits=60, formats=['json'])
        directory = os.path.join(settings.MOPS_LAB['OUTPUT_DIR'], 'solve_n1_m2_K3_l0_k2_K3_l1_k2')
        self.assertTrue(os.path.exists(os.path.join(directory, 'coeffs.json')))

    def test_large_N_needs_precision(self):
        with self.assertRaises(CommandError) as cm:
            self.call('solve', n=10, m=11, digits=60)
        self.assertEqual(cm.exception.returncode, 2)

    def test_general_K_needs_contours(self):
        with self.assertRaises(CommandError) as cm:
            self.call('solve', n=1, m=2, K=5, digits=60)
        self.assertEqual(cm.exception.returncode, 2)
        with self.assertRaises(CommandError) as cm:
            self.call('solve', n=1, m=2, K=5, contours='0,3,0,3', digits=60)
        self.assertEqual(cm.exception.returncode, 2)


class CurveCommandTests(LaboratoryPathsMixin, SimpleTestCase):
    def test_curve(self):
        output = self.call('curve', alpha='3/20', digits=60)
        self.assertIn('regime subcritical', output)
        path = os.path.join(settings.MOPS_LAB['OUTPUT_DIR'], 'curve_alpha_3_20', 'curve.json')
        with open(path, encoding='utf-8') as f:
            payload = json.load(f)
        self.assertEqual(payload['regime'], 'subcritical')
        self.assertLess(float(payload['discriminant_defect']), 1e-30)

    def test_bad_alpha(self):
        with self.assertRaises(CommandError) as cm:
            self.call('curve', alpha='0.6')
        self.assertEqual(cm.exception.returncode, 2)


class CacheCommandTests(LaboratoryPathsMixin, SimpleTestCase):
    def test_build_list_verify_purge(self):
        self.call('cache', 'build', k_max=12, digits=60)
        listing = self.call('cache', 'list')
        self.assertIn('moments_K3_l0_k2_d60.json', listing)
        self.assertIn('moments_K3_l1_k2_d60.json', listing)
        verified = self.call('cache', 'verify', digits=60)
        self.assertEqual(verified.count(': ok'), 2)
        self.assertIn('Removed 2 table(s)', self.call('cache', 'purge'))
        self.assertIn('0 table(s)', self.call('cache', 'list'))

    def test_verify_missing_table_fails(self):
        with self.assertRaises(CommandError) as cm:
            self.call('cache', 'verify', digits=60)
        self.assertEqual(cm.exception.returncode, 1)

    def test_general_K_needs_contours(self):
        with self.assertRaises(CommandError) as cm:
            self.call('cache', 'build', K=5, k_max=4, digits=60)
        self.assertEqual(cm.exception.returncode, 2)


class FigureCommandTests(LaboratoryPathsMixin, TestCase):
    def test_list(self):
        self.assertIn('figure_tiny: tiny', self.call('figure', 'list'))

    def test_unknown_figure(self):
        with self.assertRaises(CommandError) as cm:
            self.call('figure', 'figure_missing')
        self.assertEqual(cm.exception.returncode, 2)

    def test_foreground_run(self):
        output = self.call('figure', 'figure_tiny', digits=60)
        self.assertIn('figure_tiny passed', output)
        path = os.path.join(settings.MOPS_LAB['OUTPUT_DIR'], 'figure_tiny', 'report.json')
        self.assertTrue(os.path.exists(path))

    def test_background_queues_run(self):
        with mock.patch('laboratory.tasks.run_figure_task.delay') as delay:
            output = self.call('figure', 'figure_tiny', digits=60, background=True)
        run = ExperimentRun.objects.get()
        self.assertEqual((run.kind, run.target, run.status), ('figure', 'figure_tiny', 'pending'))
        self.assertEqual(run.parameters['digits'], 60)
        delay.assert_called_once_with(run.pk)
        self.assertIn(f"run {run.pk}", output)


class FigureTaskTests(LaboratoryPathsMixin, TestCase):
    def test_task_records_report(self):
        run = ExperimentRun.objects.create(kind='figure', target='figure_tiny', parameters={'digits': 60})
        self.assertEqual(run_figure_task(run.pk), 0)
        run.refresh_from_db()
        self.assertEqual(run.status, 'passed')
        self.assertEqual(run.exit_code, 0)
        self.assertIn('wall_time_seconds', run.report)
        self.assertIsNotNone(run.finished_at)

    def test_task_records_configuration_error(self):
        run = ExperimentRun.objects.create(kind='figure', target='figure_missing', parameters={'digits': 60})
        self.assertEqual(run_figure_task(run.pk), 2)
        run.refresh_from_db()
        self.assertEqual(run.status, 'error')
        self.assertIn('figure_missing', run.report['error'])


class AcceptCommandTests(LaboratoryPathsMixin, TestCase):
    def test_background_queues_suite(self):
        with mock.patch('laboratory.tasks.run_acceptance_task.delay') as delay:
            self.call('accept', suite='fast', background=True)
        run = ExperimentRun.objects.get()
        self.assertEqual((run.kind, run.target), ('acceptance', 'fast'))
        delay.assert_called_once_with(run.pk)
