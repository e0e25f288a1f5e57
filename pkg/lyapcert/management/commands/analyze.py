from lyapcert.management.base import EXIT_CERTIFIED, EXIT_INCONCLUSIVE, LyapcertCommand
from lyapcert.report import analyze, render


class Command(LyapcertCommand):
    help = (
        'Certify stability of a system with the beta criterion and compare it '
        'with the Lakshmikantham and Krasovskii baselines. Exit code 0 when the '
        'system is certified (AS or GAS), 3 when inconclusive.'
    )

    def run(self, loaded, config, options):
        report, verdict = analyze(loaded, config)
        self.emit(render(report), options)
        return EXIT_CERTIFIED if verdict.certified else EXIT_INCONCLUSIVE
