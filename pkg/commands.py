import argparse
import asyncio
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import List, Optional, Sequence, TextIO

from stages import (
    AtomsStage,
    BmoCarlesonStage,
    CarlesonStage,
    DoublingStage,
    EquivalenceVerdictStage,
    ExponentsStage,
    ExtensionStage,
    FlowStage,
    KernelAuditStage,
    NormsStage,
    OpNormStage,
    ReportAssemblyStage,
    StageChain,
    StructureStage,
    VerificationContext,
    VerificationStage,
    Weak11Stage,
    status,
)
from treeharm.cli_io import (
    NU_LAWS,
    SIGMA_LAWS,
    GenSpec,
    Instance,
    NamedFunction,
    dump_instance,
    generate,
    load_instance,
    save_instance,
)
from treeharm.config import Config
from treeharm.errors import TreeHarmError
from treeharm.kernel_bmo import audit_kernel, example_kernel_delta

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


def exponent(text: str) -> float:
    """Разбирает показатель p: число или inf"""
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"некорректный показатель '{text}'")
    if math.isnan(p) or p < 1:
        raise argparse.ArgumentTypeError(f"нужно p >= 1, получено {text}")
    return p


class _Parser(argparse.ArgumentParser):
    """argparse без выхода из процесса: ошибки разбора превращаются в исключение"""

    def error(self, message):
        raise TreeHarmError(f"{self.prog}: {message}")


class CommandHandler:
    """Обработчик подкоманд treeharm"""

    def __init__(self, config: Config, output: Optional[TextIO] = None):
        self.config = config
        self.output = output if output is not None else sys.stdout
        self.parser = self._build_parser()

    def _build_parser(self) -> argparse.ArgumentParser:
        parser = _Parser(prog="treeharm", description="Проверка гармонического анализа на деревьях")
        parser.add_argument("--verbose", action="store_true", help="подробный журнал (DEBUG)")
        subparsers = parser.add_subparsers(dest="command", parser_class=_Parser)
        subparsers.required = True

        def command(name: str, help_text: str, instance: bool = True, report: bool = True) -> argparse.ArgumentParser:
            sub = subparsers.add_parser(name, help=help_text)
            if instance:
                sub.add_argument("instance", help="файл экземпляра")
            if report:
                sub.add_argument("--format", choices=("json", "text"), default="json")
                sub.add_argument("--csv", default=None, help="таблица по вершинам")
            return sub

        gen = command("gen", "сгенерировать экземпляр", instance=False, report=False)
        gen.add_argument("--depth", type=int, required=True)
        gen.add_argument("--branching", type=int, nargs=2, default=[2, 2], metavar=("LO", "HI"))
        gen.add_argument("--nu-law", choices=NU_LAWS, default="uniform")
        gen.add_argument("--nu-range", type=float, nargs=2, default=[0.1, 10.0], metavar=("A", "B"))
        gen.add_argument("--seed", type=int, default=0)
        gen.add_argument("--sigma-law", choices=SIGMA_LAWS, default="none")
        gen.add_argument("--output", default=None)

        command("check", "структура, поток и удвоение")

        extend = command("extend", "интеграл Пуассона именованной функции")
        extend.add_argument("--function", required=True)
        extend.add_argument("--save", default=None, help="сохранить продолжение как функцию на вершинах")

        norms = command("norms", "нормы L^p, H^p, BMO и слабая L^1")
        norms.add_argument("--p", type=exponent, nargs="+", default=[1.0, 2.0, math.inf])
        norms.add_argument("--function", required=True)

        command("carleson", "константа Карлесона")

        opnorm = command("opnorm", "норма оператора Пуассона")
        opnorm.add_argument("--p", type=exponent, nargs=1, default=[2.0])
        self._iteration_arguments(opnorm)

        theorem2 = command("theorem2", "эквивалентность условий Карлесона")
        theorem2.add_argument("--p", type=exponent, nargs="+", default=[2.0])
        theorem2.add_argument("--trials", type=int, default=20)
        self._iteration_arguments(theorem2)

        theorem3 = command("theorem3", "BMO → мера Карлесона через ядро")
        theorem3.add_argument("--alpha", type=float, default=None)
        theorem3.add_argument("--delta", type=float, default=0.5)
        theorem3.add_argument("--function", default=None)
        theorem3.add_argument("--seed", type=int, default=0)
        theorem3.add_argument("--kernel-seed", type=int, default=None)

        atoms = command("atoms", "восстановление BMO через атомы")
        atoms.add_argument("--function", default=None)
        atoms.add_argument("--seed", type=int, default=0)

        kernelgen = command("kernelgen", "добавить в экземпляр ядро K_δ", report=False)
        kernelgen.add_argument("--alpha", type=float, default=1.0)
        kernelgen.add_argument("--delta", type=float, default=0.5)
        kernelgen.add_argument("--seed", type=int, default=None)
        kernelgen.add_argument("--output", default=None)
        return parser

    def _iteration_arguments(self, sub: argparse.ArgumentParser) -> None:
        defaults = self.config.iteration
        sub.add_argument("--iters", type=int, default=defaults.max_iter)
        sub.add_argument("--restarts", type=int, default=defaults.restarts)
        sub.add_argument("--seed", type=int, default=defaults.seed)

    async def handle_command(self, argv: Sequence[str]) -> int:
        """
        Разбирает аргументы и выполняет подкоманду

        Returns:
            int: 0 - успех или PASS, 1 - FAIL, 2 - ошибка использования, разбора или проверки
        """
        try:
            args = self.parser.parse_args(list(argv))
        except TreeHarmError as e:
            status(f"❌ {e}")
            return EXIT_ERROR
        except SystemExit as e:
            # --help
            return EXIT_OK if not e.code else EXIT_ERROR

        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)

        handler = getattr(self, f"_{args.command}")
        try:
            return await handler(args)
        except TreeHarmError as e:
            logger.debug(f"Команда {args.command} прервана: {e}")
            status(f"❌ {e}")
            return EXIT_ERROR

    def _context(self, args, instance: Optional[Instance], **options) -> VerificationContext:
        options.update({"format": args.format, "csv": args.csv})
        return VerificationContext(
            command=args.command,
            instance=instance,
            config=self.config,
            options=options,
            output=self.output,
            seed=options.get("seed"),
        )

    async def _run_chain(self, context: VerificationContext, stages: List[VerificationStage]) -> int:
        chain = StageChain([*stages, ReportAssemblyStage()])
        with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
            context.executor = executor
            completed = await chain.run(context)
        if not completed or context.error is not None:
            return EXIT_ERROR
        return EXIT_FAIL if context.verdict == "FAIL" else EXIT_OK

    def _iteration(self, args):
        return replace(self.config.iteration, max_iter=args.iters, restarts=args.restarts, seed=args.seed)

    async def _gen(self, args) -> int:
        """Генерирует экземпляр и пишет его в файл или в stdout"""
        spec = GenSpec(
            depth=args.depth,
            branching=tuple(args.branching),
            nu_law=args.nu_law,
            nu_range=tuple(args.nu_range),
            seed=args.seed,
            sigma_law=args.sigma_law,
        )
        instance = generate(spec)
        if args.output:
            save_instance(instance, args.output)
            status(f"✨ Экземпляр сохранен: {args.output} ({instance.tree.n_vertices} вершин)")
        else:
            self.output.write(dump_instance(instance))
            self.output.flush()
        return EXIT_OK

    async def _check(self, args) -> int:
        context = self._context(args, load_instance(args.instance))
        return await self._run_chain(context, [StructureStage(), FlowStage(), DoublingStage()])

    async def _extend(self, args) -> int:
        instance = load_instance(args.instance)
        context = self._context(args, instance, function=args.function)
        code = await self._run_chain(context, [ExtensionStage()])
        if args.save and code != EXIT_ERROR:
            name = f"{args.function}_extension"
            instance.functions[name] = NamedFunction("vertices", context.get_artefact("extension"))
            save_instance(instance, args.save)
            status(f"✓ Продолжение '{name}' сохранено: {args.save}")
        return code

    async def _norms(self, args) -> int:
        context = self._context(args, load_instance(args.instance), function=args.function, p=args.p)
        return await self._run_chain(context, [NormsStage()])

    async def _carleson(self, args) -> int:
        context = self._context(args, load_instance(args.instance))
        return await self._run_chain(context, [CarlesonStage()])

    async def _opnorm(self, args) -> int:
        context = self._context(
            args, load_instance(args.instance), p=args.p, seed=args.seed, iteration=self._iteration(args)
        )
        return await self._run_chain(context, [OpNormStage()])

    async def _theorem2(self, args) -> int:
        context = self._context(
            args,
            load_instance(args.instance),
            p=args.p,
            trials=args.trials,
            seed=args.seed,
            iteration=self._iteration(args),
        )
        return await self._run_chain(
            context, [CarlesonStage(), Weak11Stage(), ExponentsStage(), EquivalenceVerdictStage()]
        )

    async def _theorem3(self, args) -> int:
        context = self._context(
            args,
            load_instance(args.instance),
            alpha=args.alpha,
            delta=args.delta,
            function=args.function,
            seed=args.seed,
            kernel_seed=args.kernel_seed,
        )
        return await self._run_chain(context, [KernelAuditStage(), BmoCarlesonStage()])

    async def _atoms(self, args) -> int:
        context = self._context(args, load_instance(args.instance), function=args.function, seed=args.seed)
        return await self._run_chain(context, [AtomsStage()])

    async def _kernelgen(self, args) -> int:
        """Строит ядро K_δ, проверяет класс 𝒪 и записывает экземпляр с ядром"""
        instance = load_instance(args.instance)
        kernel = example_kernel_delta(instance.tree, instance.nu, instance.flow, args.alpha, args.delta, args.seed)
        audit = audit_kernel(instance.tree, instance.nu, instance.flow, kernel)
        instance.kernel = kernel
        if args.output:
            save_instance(instance, args.output)
            status(f"✨ Ядро K_δ записано: {args.output}")
        else:
            self.output.write(dump_instance(instance))
            self.output.flush()
        if not audit.passes:
            status(f"❌ Ядро не прошло аудит: пара {audit.worst_pair}")
            return EXIT_FAIL
        status(f"✓ Ядро в классе: C_K = {audit.ck}")
        return EXIT_OK


def run_subcommand(argv: Sequence[str], config: Optional[Config] = None, output: Optional[TextIO] = None) -> int:
    """
    Выполняет подкоманду treeharm

    Args:
        argv: Аргументы без имени программы
        config: Настройки (по умолчанию Config.load())
        output: Поток для отчета (по умолчанию stdout)

    Returns:
        int: Код выхода
    """
    handler = CommandHandler(config or Config.load(), output)
    return asyncio.run(handler.handle_command(argv))
